#pragma once

#include <cstddef>
#include <span>

// Dense row-major kernels. Every kernel accumulates into its output
// (C += ...). The serial namespace is the reference implementation; the par
// namespace splits output rows across OpenMP threads. Both variants reduce
// each output element in the same fixed order, so they agree bit for bit.
namespace unmt::kernels {

namespace serial {

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
// Row-wise softmax of x[rows x cols] / tau into y.
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols, double tau);

}  // namespace serial

namespace par {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols, double tau);

}  // namespace par

// Number of threads the par kernels will use.
int max_threads();

}  // namespace unmt::kernels
