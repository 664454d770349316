#include <benchmark/benchmark.h>

#include <vector>

#include "cdf/kernels.hpp"
#include "cdf/rng.hpp"

namespace {

cdf::Matrix random_block(Eigen::Index n, Eigen::Index p) {
  cdf::RngStream r(17);
  cdf::Matrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = r.normal();
  return x;
}

void BM_GramSerial(benchmark::State& state) {
  const auto p = state.range(0);
  const cdf::Matrix x = random_block(1000, p);
  cdf::Matrix acc = cdf::Matrix::Zero(p, p);
  for (auto _ : state) {
    cdf::kernels::serial::gram_accumulate(acc, x);
    benchmark::DoNotOptimize(acc.data());
  }
}

void BM_GramParallel(benchmark::State& state) {
  const auto p = state.range(0);
  const cdf::Matrix x = random_block(1000, p);
  cdf::Matrix acc = cdf::Matrix::Zero(p, p);
  for (auto _ : state) {
    cdf::kernels::parallel::gram_accumulate(acc, x);
    benchmark::DoNotOptimize(acc.data());
  }
}

std::vector<double> grid_points() {
  std::vector<double> g(512);
  for (int i = 0; i < 512; ++i) g[i] = -5.0 + 10.0 * i / 511.0;
  return g;
}

void BM_KdeSerial(benchmark::State& state) {
  cdf::RngStream r(3);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  for (auto& v : s) v = r.normal();
  const auto g = grid_points();
  std::vector<double> out(g.size());
  for (auto _ : state) {
    cdf::kernels::serial::kde_on_grid(s, 0.2, g, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_KdeParallel(benchmark::State& state) {
  cdf::RngStream r(3);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  for (auto& v : s) v = r.normal();
  const auto g = grid_points();
  std::vector<double> out(g.size());
  for (auto _ : state) {
    cdf::kernels::parallel::kde_on_grid(s, 0.2, g, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_GramSerial)->Arg(100)->Arg(500);
BENCHMARK(BM_GramParallel)->Arg(100)->Arg(500);
BENCHMARK(BM_KdeSerial)->Arg(500)->Arg(10000);
BENCHMARK(BM_KdeParallel)->Arg(500)->Arg(10000);

BENCHMARK_MAIN();
