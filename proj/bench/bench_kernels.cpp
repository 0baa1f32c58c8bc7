#include <cstdio>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "unmt/tensor/kernels.hpp"

namespace k = unmt::kernels;

namespace {

std::vector<double> random_values(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

using Gemm = void (*)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t,
                      std::size_t, std::size_t);

// Square m = k = n; A and B sized for the largest layout.
void run_gemm(benchmark::State& state, Gemm gemm) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1);
  const auto b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    gemm(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * static_cast<double>(n * n * n), benchmark::Counter::kIsIterationInvariantRate,
                         benchmark::Counter::kIs1000);
}

void run_softmax(benchmark::State& state, decltype(&k::serial::softmax_rows) fn) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 4000;  // universal-token count of the desk task
  const auto x = random_values(rows * cols, 3);
  std::vector<double> y(rows * cols);
  for (auto _ : state) {
    fn(x, y, rows, cols, 0.05);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_gemm_nn_serial(benchmark::State& s) { run_gemm(s, k::serial::gemm_nn); }
void BM_gemm_nn_par(benchmark::State& s) { run_gemm(s, k::par::gemm_nn); }
void BM_gemm_nt_serial(benchmark::State& s) { run_gemm(s, k::serial::gemm_nt); }
void BM_gemm_nt_par(benchmark::State& s) { run_gemm(s, k::par::gemm_nt); }
void BM_gemm_tn_serial(benchmark::State& s) { run_gemm(s, k::serial::gemm_tn); }
void BM_gemm_tn_par(benchmark::State& s) { run_gemm(s, k::par::gemm_tn); }
void BM_softmax_serial(benchmark::State& s) { run_softmax(s, k::serial::softmax_rows); }
void BM_softmax_par(benchmark::State& s) { run_softmax(s, k::par::softmax_rows); }

}  // namespace

BENCHMARK(BM_gemm_nn_serial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_nn_par)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_nt_serial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_nt_par)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_tn_serial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_tn_par)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_softmax_serial)->Arg(32)->Arg(256);
BENCHMARK(BM_softmax_par)->Arg(32)->Arg(256);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  std::printf("threads: %d\n", k::max_threads());
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
}
