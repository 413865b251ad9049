#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cdo/cdo_loss.hpp"

namespace {

std::vector<double> draws(std::size_t n, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

void BM_CdoLoss(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto dn = draws(n, 0.0, 1.0, 1);
    const auto ds = draws(n / 8 + 1, 0.5, 2.0, 2);
    for (auto _ : state) benchmark::DoNotOptimize(cdo::cdo_loss(dn, ds, 2.0));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n + ds.size()));
}
BENCHMARK(BM_CdoLoss)->RangeMultiplier(8)->Range(1 << 10, 1 << 19);

void BM_OomWeights(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto dn = draws(n, 0.0, 1.0, 3);
    const auto ds = draws(n / 8 + 1, 0.5, 2.0, 4);
    for (auto _ : state) benchmark::DoNotOptimize(cdo::oom_weights(dn, ds, 2.0));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n + ds.size()));
}
BENCHMARK(BM_OomWeights)->RangeMultiplier(8)->Range(1 << 10, 1 << 19);

}  // namespace
