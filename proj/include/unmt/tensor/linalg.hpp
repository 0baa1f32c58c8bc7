#pragma once

#include <span>
#include <vector>

#include "unmt/tensor/tensor.hpp"

namespace unmt {

/// exp(v_i / tau) / sum_j exp(v_j / tau), evaluated with the maximum
/// subtracted first. Throws ParameterError for tau <= 0 and InputError for
/// non-finite entries.
std::vector<double> softmax_temperature(std::span<const double> v, double tau);

struct SvdResult {
  Tensor u;                // p x r, orthonormal columns
  std::vector<double> s;   // r singular values, non-increasing
  Tensor vt;               // r x q, orthonormal rows
  int sweeps = 0;
  bool converged = false;
};

struct SvdOptions {
  double tolerance = 1e-12;  // off-diagonal mass, relative to column norms
  int max_sweeps = 100;
};

/// Thin SVD of a p x q matrix (r = min(p, q)) by one-sided Jacobi rotations.
SvdResult svd(const Tensor& m, const SvdOptions& options = {});

}  // namespace unmt
