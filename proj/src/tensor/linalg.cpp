#include "unmt/tensor/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "unmt/error.hpp"
#include "unmt/tensor/kernels.hpp"

namespace unmt {

std::vector<double> softmax_temperature(std::span<const double> v, double tau) {
  if (!(tau > 0.0)) throw ParameterError("softmax_temperature: tau must be positive");
  if (v.empty()) throw InputError("softmax_temperature: empty input");
  for (double x : v) {
    if (!std::isfinite(x)) throw InputError("softmax_temperature: non-finite input");
  }
  std::vector<double> out(v.size());
  kernels::serial::softmax_rows(v, out, 1, v.size(), tau);
  return out;
}

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// Replaces column `col` of the column-major basis (each column length n)
// with a unit vector orthogonal to every column in `valid`.
void complete_column(std::vector<double>& cols, std::size_t n, std::size_t col,
                     const std::vector<std::size_t>& valid) {
  std::vector<double> cand(n);
  for (std::size_t e = 0; e < n; ++e) {
    std::fill(cand.begin(), cand.end(), 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (auto j : valid) {
        const double* u = &cols[j * n];
        const double proj = dot(cand.data(), u, n);
        for (std::size_t i = 0; i < n; ++i) cand[i] -= proj * u[i];
      }
    }
    const double norm = std::sqrt(dot(cand.data(), cand.data(), n));
    if (norm > 0.5) {
      for (std::size_t i = 0; i < n; ++i) cols[col * n + i] = cand[i] / norm;
      return;
    }
  }
  throw StateError("svd: could not complete an orthonormal basis");
}

// One-sided Jacobi on a tall matrix given column-major as `a` (q columns of
// length p, p >= q). Returns U (column-major p x q), S, V (column-major q x q).
SvdResult jacobi_tall(std::vector<double> a, std::size_t p, std::size_t q, const SvdOptions& opt) {
  std::vector<double> v(q * q, 0.0);
  for (std::size_t i = 0; i < q; ++i) v[i * q + i] = 1.0;

  SvdResult res;
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i + 1 < q; ++i) {
      for (std::size_t j = i + 1; j < q; ++j) {
        double* ai = &a[i * p];
        double* aj = &a[j * p];
        const double alpha = dot(ai, ai, p);
        const double beta = dot(aj, aj, p);
        const double gamma = dot(ai, aj, p);
        if (alpha == 0.0 || beta == 0.0 || gamma == 0.0) continue;
        const double rel = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, rel);
        if (rel <= opt.tolerance) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < p; ++k) {
          const double x = ai[k], y = aj[k];
          ai[k] = c * x - s * y;
          aj[k] = s * x + c * y;
        }
        double* vi = &v[i * q];
        double* vj = &v[j * q];
        for (std::size_t k = 0; k < q; ++k) {
          const double x = vi[k], y = vj[k];
          vi[k] = c * x - s * y;
          vj[k] = s * x + c * y;
        }
      }
    }
    res.sweeps = sweep + 1;
    if (off <= opt.tolerance) {
      res.converged = true;
      break;
    }
  }

  std::vector<double> sing(q);
  for (std::size_t i = 0; i < q; ++i) sing[i] = std::sqrt(dot(&a[i * p], &a[i * p], p));
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return sing[x] > sing[y]; });

  const double smax = q ? sing[order[0]] : 0.0;
  const double cutoff = smax * static_cast<double>(p) * 1e-15;
  std::vector<double> u(p * q, 0.0);
  std::vector<double> vs(q * q, 0.0);
  res.s.resize(q);
  std::vector<std::size_t> valid;
  std::vector<std::size_t> degenerate;
  for (std::size_t r = 0; r < q; ++r) {
    const auto src = order[r];
    res.s[r] = sing[src];
    std::copy_n(&v[src * q], q, &vs[r * q]);
    if (sing[src] > cutoff && sing[src] > 0.0) {
      for (std::size_t k = 0; k < p; ++k) u[r * p + k] = a[src * p + k] / sing[src];
      valid.push_back(r);
    } else {
      degenerate.push_back(r);
    }
  }
  for (auto r : degenerate) {
    complete_column(u, p, r, valid);
    valid.push_back(r);
  }

  // Row-major U (p x q) and V^T (q x q).
  auto ut = Tensor::zeros({p, q});
  for (std::size_t r = 0; r < q; ++r) {
    for (std::size_t k = 0; k < p; ++k) ut.at(k, r) = u[r * p + k];
  }
  auto vt = Tensor::zeros({q, q});
  for (std::size_t r = 0; r < q; ++r) {
    for (std::size_t k = 0; k < q; ++k) vt.at(r, k) = vs[r * q + k];
  }
  res.u = ut;
  res.vt = vt;
  return res;
}

}  // namespace

SvdResult svd(const Tensor& m, const SvdOptions& options) {
  for (double x : m.data()) {
    if (!std::isfinite(x)) throw InputError("svd: non-finite matrix entry");
  }
  const auto p = m.rows(), q = m.cols();
  if (p >= q) {
    std::vector<double> colmajor(p * q);
    for (std::size_t r = 0; r < p; ++r) {
      for (std::size_t c = 0; c < q; ++c) colmajor[c * p + r] = m.at(r, c);
    }
    return jacobi_tall(std::move(colmajor), p, q, options);
  }
  // Wide: decompose m^T = U' S V'^T, then m = V' S U'^T. Columns of m^T are
  // rows of m, already contiguous.
  std::vector<double> colmajor(m.data().begin(), m.data().end());
  auto t = jacobi_tall(std::move(colmajor), q, p, options);
  SvdResult res;
  res.s = t.s;
  res.sweeps = t.sweeps;
  res.converged = t.converged;
  // U = V' = (V'^T)^T ; Vt = U'^T
  auto u = Tensor::zeros({p, p});
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) u.at(i, j) = t.vt.at(j, i);
  }
  auto vt = Tensor::zeros({p, q});
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < q; ++j) vt.at(i, j) = t.u.at(j, i);
  }
  res.u = u;
  res.vt = vt;
  return res;
}

}  // namespace unmt
