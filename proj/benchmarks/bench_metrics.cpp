#include <benchmark/benchmark.h>

#include <random>

#include "cdo/metrics.hpp"

namespace {

// n images of side x side with one square defect each and noisy scores that favour it.
cdo::ScoredSet scored_set(int n, int side) {
    std::mt19937_64 rng(11);
    std::normal_distribution<float> noise(0.0f, 1.0f);
    cdo::ScoredSet set;
    for (int i = 0; i < n; ++i) {
        cdo::ScoredImage img{cdo::ScalarField(side, side), cdo::Mask(side, side)};
        const int a = side / 4 + i % (side / 4), b = a + side / 4;
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                const bool in = y >= a && y < b && x >= a && x < b;
                img.mask.data[static_cast<std::size_t>(y) * side + x] = in;
                img.scores.data[static_cast<std::size_t>(y) * side + x] = noise(rng) + (in ? 1.5f : 0.0f);
            }
        set.push_back(std::move(img));
    }
    return set;
}

void BM_AuproExact(benchmark::State& state) {
    const auto set = scored_set(8, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(cdo::aupro(set, 0.3, cdo::AuproMethod::exact));
}
BENCHMARK(BM_AuproExact)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_AuproGrid(benchmark::State& state) {
    const auto set = scored_set(8, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(cdo::aupro(set, 0.3, cdo::AuproMethod::grid));
}
BENCHMARK(BM_AuproGrid)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_AurocPixel(benchmark::State& state) {
    const auto set = scored_set(8, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(cdo::auroc_pixel(set));
}
BENCHMARK(BM_AurocPixel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_LabelComponents(benchmark::State& state) {
    const auto set = scored_set(1, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(cdo::label_components(set[0].mask).count);
}
BENCHMARK(BM_LabelComponents)->Arg(64)->Arg(256);

}  // namespace
