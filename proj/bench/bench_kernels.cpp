// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS to vary threads.

#include <benchmark/benchmark.h>

#include "deepfeat/kernels.hpp"
#include "deepfeat/random.hpp"

using namespace deepfeat;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

std::vector<int> labels(std::size_t n, std::size_t classes) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
  return y;
}

template <bool Parallel>
void BM_squared_distances(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 512, 1);
  const auto b = random_matrix(n / 4, 512, 2);
  for (auto _ : state) {
    auto out = Parallel ? kernels::squared_distances(a, b) : kernels::serial::squared_distances(a, b);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * (n / 4)));
}

template <bool Parallel>
void BM_gram_rbf(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(n, 512, 3);
  const kernels::KernelFunction k{kernels::KernelType::Rbf, 1.0 / 512};
  for (auto _ : state) {
    auto out = Parallel ? kernels::gram_matrix(x, k) : kernels::serial::gram_matrix(x, k);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <bool Parallel>
void BM_anova_f(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(600, d, 4);
  const auto y = labels(600, 4);
  for (auto _ : state) {
    auto f = Parallel ? kernels::anova_f(x, y, 4) : kernels::serial::anova_f(x, y, 4);
    benchmark::DoNotOptimize(f.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d));
}

}  // namespace

BENCHMARK(BM_squared_distances<false>)->Name("squared_distances/serial")->Arg(256)->Arg(1024);
BENCHMARK(BM_squared_distances<true>)->Name("squared_distances/omp")->Arg(256)->Arg(1024);
BENCHMARK(BM_gram_rbf<false>)->Name("gram_rbf/serial")->Arg(256)->Arg(640);
BENCHMARK(BM_gram_rbf<true>)->Name("gram_rbf/omp")->Arg(256)->Arg(640);
BENCHMARK(BM_anova_f<false>)->Name("anova_f/serial")->Arg(512)->Arg(2048);
BENCHMARK(BM_anova_f<true>)->Name("anova_f/omp")->Arg(512)->Arg(2048);

BENCHMARK_MAIN();
