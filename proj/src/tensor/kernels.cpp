#include "unmt/tensor/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace unmt::kernels {

namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelThreshold = 1u << 15;

inline void gemm_nn_row(const double* a, const double* b, double* c, std::size_t k,
                        std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p];
    if (av == 0.0) continue;
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

// Dot products use eight interleaved partial sums, added in a fixed order,
// so the reduction vectorizes without reassociation by the compiler.
inline double dot(const double* x, const double* y, std::size_t k) {
  double part[8] = {};
  std::size_t p = 0;
  for (; p + 8 <= k; p += 8)
    for (std::size_t l = 0; l < 8; ++l) part[l] += x[p + l] * y[p + l];
  double acc = ((part[0] + part[1]) + (part[2] + part[3])) + ((part[4] + part[5]) + (part[6] + part[7]));
  for (; p < k; ++p) acc += x[p] * y[p];
  return acc;
}

inline void gemm_nt_row(const double* a, const double* b, double* c, std::size_t k,
                        std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) c[j] += dot(a, b + j * k, k);
}

// Output row i of A^T B: c[j] += sum_r A[r][i] * B[r][j], r ascending.
inline void gemm_tn_row(const double* a, const double* b, double* c, std::size_t i,
                        std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) {
    const double av = a[r * k + i];
    if (av == 0.0) continue;
    const double* brow = b + r * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void softmax_row(const double* x, double* y, std::size_t cols, double tau) {
  double mx = x[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp((x[j] - mx) / tau);
    sum += y[j];
  }
  for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
}

}  // namespace

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) gemm_nn_row(&a[i * k], b.data(), &c[i * n], k, n);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) gemm_nt_row(&a[i * k], b.data(), &c[i * n], k, n);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < k; ++i) gemm_tn_row(a.data(), b.data(), &c[i * n], i, m, k, n);
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols, double tau) {
  for (std::size_t r = 0; r < rows; ++r) softmax_row(&x[r * cols], &y[r * cols], cols, tau);
}

}  // namespace serial

namespace par {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelThreshold)
  for (long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    gemm_nn_row(a.data() + r * k, b.data(), c.data() + r * n, k, n);
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelThreshold)
  for (long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    gemm_nt_row(a.data() + r * k, b.data(), c.data() + r * n, k, n);
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long>(k);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelThreshold)
  for (long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    gemm_tn_row(a.data(), b.data(), c.data() + r * n, r, m, k, n);
  }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols, double tau) {
  const auto n = static_cast<long>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelThreshold)
  for (long i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    softmax_row(x.data() + r * cols, y.data() + r * cols, cols, tau);
  }
}

}  // namespace par

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace unmt::kernels
