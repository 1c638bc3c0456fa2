// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include <vector>

#include "chowla/generators.hpp"
#include "chowla/kernels.hpp"
#include "chowla/momentcheck.hpp"
#include "chowla/rng.hpp"

using namespace chowla;

namespace {

const std::vector<UnitValue>& circle_values(std::size_t n) {
  static std::vector<UnitValue> z;
  if (z.size() < n) z = materialize(*gen::iid_source(std::nullopt, 0.1, 1), 0, n);
  return z;
}

const std::vector<std::uint32_t>& letters(std::size_t n) {
  static std::vector<std::uint32_t> c;
  if (c.size() < n) {
    const CounterRng rng(3);
    c.resize(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = static_cast<std::uint32_t>(rng.below(3, i));
  }
  return c;
}

const Pattern kPattern{{0, 1, 3}, {1, -2, 1}};

template <bool Parallel>
void BM_correlation(benchmark::State& st) {
  const auto n = static_cast<std::uint64_t>(st.range(0));
  const auto& z = circle_values(n + 3);
  for (auto _ : st) {
    auto v = Parallel ? kernels::omp::correlation_sum(z, kPattern, n) : kernels::serial::correlation_sum(z, kPattern, n);
    benchmark::DoNotOptimize(v);
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_product(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto& z = circle_values(2 * n);
  const std::span<const UnitValue> a(z.data(), n), b(z.data() + n, n);
  for (auto _ : st) {
    auto v = Parallel ? kernels::omp::product_sum(a, b) : kernels::serial::product_sum(a, b);
    benchmark::DoNotOptimize(v);
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_cylinders(benchmark::State& st) {
  const auto n = static_cast<std::uint64_t>(st.range(0));
  const auto& c = letters(n + 4);
  for (auto _ : st) {
    auto v = Parallel ? kernels::omp::cylinder_counts(c, 4, 3, n) : kernels::serial::cylinder_counts(c, 4, 3, n);
    benchmark::DoNotOptimize(v.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_blocks(benchmark::State& st) {
  const auto n = static_cast<std::uint64_t>(st.range(0));
  const auto& z = circle_values(2 * n);
  const std::span<const UnitValue> a(z.data(), n), f(z.data() + n, n);
  std::vector<std::uint64_t> bounds{0};
  for (std::uint64_t k = 1; bounds.back() + k <= n; ++k) bounds.push_back(bounds.back() + k);
  for (auto _ : st) {
    auto v = Parallel ? kernels::omp::block_sums(a, f, bounds) : kernels::serial::block_sums(a, f, bounds);
    benchmark::DoNotOptimize(v.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(bounds.back()));
}

template <bool Parallel>
void BM_exact_moment(benchmark::State& st) {
  const auto bm = gen::star_map(3);
  const Pattern p{{0, 2, 5, 7}, {1, 1, 2, 1}};
  for (auto _ : st) {
    auto v = Parallel ? momentcheck::exact_moment(bm, p) : momentcheck::serial::exact_moment(bm, p);
    benchmark::DoNotOptimize(v);
  }
}

}  // namespace

BENCHMARK(BM_correlation<false>)->Name("correlation/serial")->Arg(1 << 20);
BENCHMARK(BM_correlation<true>)->Name("correlation/omp")->Arg(1 << 20);
BENCHMARK(BM_product<false>)->Name("product_sum/serial")->Arg(1 << 20);
BENCHMARK(BM_product<true>)->Name("product_sum/omp")->Arg(1 << 20);
BENCHMARK(BM_cylinders<false>)->Name("cylinder_counts/serial")->Arg(1 << 20);
BENCHMARK(BM_cylinders<true>)->Name("cylinder_counts/omp")->Arg(1 << 20);
BENCHMARK(BM_blocks<false>)->Name("block_sums/serial")->Arg(1 << 20);
BENCHMARK(BM_blocks<true>)->Name("block_sums/omp")->Arg(1 << 20);
BENCHMARK(BM_exact_moment<false>)->Name("exact_moment/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_exact_moment<true>)->Name("exact_moment/omp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
