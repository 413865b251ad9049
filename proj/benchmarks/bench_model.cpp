#include <benchmark/benchmark.h>

#include <random>

#include "cdo/features.hpp"
#include "cdo/scoring.hpp"

namespace {

cdo::Tensor random_batch(int n, int side) {
    std::mt19937_64 rng(5);
    std::normal_distribution<float> g(0.0f, 1.0f);
    cdo::Tensor t({n, 3, side, side});
    for (auto& v : t.values()) v = g(rng);
    return t;
}

const std::vector<int> kTaps{1, 2, 3};

void BM_ToyExpertForward(benchmark::State& state) {
    const auto expert = cdo::ExpertModel::load(cdo::BackboneId::toy, kTaps, {});
    const auto x = random_batch(1, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(expert.forward(x).levels.data());
}
BENCHMARK(BM_ToyExpertForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ToyApprenticeStep(benchmark::State& state) {
    cdo::ApprenticeModel apprentice(cdo::BackboneId::toy, kTaps, 1);
    const auto x = random_batch(static_cast<int>(state.range(0)), 64);
    for (auto _ : state) {
        const auto feats = apprentice.forward_train(x);
        std::vector<cdo::Tensor> grads;
        for (const auto& l : feats.levels) grads.emplace_back(l.shape(), 1e-3f);
        apprentice.zero_grad();
        apprentice.backward(grads);
    }
}
BENCHMARK(BM_ToyApprenticeStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ToyAnomalyMap(benchmark::State& state) {
    const auto expert = cdo::ExpertModel::load(cdo::BackboneId::toy, kTaps, {});
    const cdo::ApprenticeModel apprentice(cdo::BackboneId::toy, kTaps, 1);
    const auto x = random_batch(1, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(cdo::anomaly_map(x, "bench", expert, apprentice, kTaps).scores.data.data());
}
BENCHMARK(BM_ToyAnomalyMap)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
