#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "unmt/tensor/adam.hpp"

namespace unmt {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::size_t elements_checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Denominator floor for |a - n| / max(|a|, |n|, floor); keeps elements
  // whose true gradient is ~0 from reporting roundoff as relative error.
  double abs_floor = 1e-6;
};

/// Compares tape adjoints of the scalar f() against central finite
/// differences for every element of every parameter. f must build its
/// graph from the given parameters and be deterministic.
GradCheckReport grad_check(const std::function<Tensor()>& f, ParameterSet& params,
                           const GradCheckOptions& options = {});

}  // namespace unmt
