#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cdo/backbone.hpp"

namespace cdo {

// Per-hierarchy features; levels[i] is N×C_i×H_i×W_i for a batch of N images.
struct FeaturePyramid {
    std::vector<Tensor> levels;

    std::size_t size() const { return levels.size(); }
    // Pyramid of a single image of the batch.
    FeaturePyramid item(int n) const;
};

// Per-hierarchy discrepancy maps d(p); levels[i] is N×1×H_i×W_i.
struct DiscrepancyField {
    std::vector<Tensor> levels;
};

enum class DiscrepancyMode {
    squared,    // sum_c (e_c - a_c)^2, in [0, 4] for unit vectors
    euclidean,  // its square root, in [0, 2]
};

inline constexpr float kFeatureNormEps = 1e-12f;

// Unit-normalises the channel vector at every spatial location; the norm is floored at
// kFeatureNormEps so zero vectors stay zero.
Tensor normalize_level(const Tensor& level);
FeaturePyramid normalize_features(const FeaturePyramid& pyramid);

// Throws ShapeError naming the first mismatching level.
DiscrepancyField discrepancy(const FeaturePyramid& expert_hat, const FeaturePyramid& apprentice_hat,
                             DiscrepancyMode mode = DiscrepancyMode::squared);

// Gradient of sum_levels sum_p grad_d(p) * d(p) w.r.t. the raw (unnormalised) apprentice
// features, with the expert side held constant.
std::vector<Tensor> discrepancy_backward(const FeaturePyramid& apprentice_raw, const FeaturePyramid& expert_hat,
                                         const FeaturePyramid& apprentice_hat, const DiscrepancyField& field,
                                         const DiscrepancyField& grad_d, DiscrepancyMode mode);

std::uint64_t state_hash(const nn::StateList& state);

// Seed of the deterministic stand-in weights used as the pretrained source of the toy backbone.
inline constexpr std::uint64_t kToyExpertSeed = 0x70e7'5eedULL;

class WeightsNotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Frozen, pretrained feature extractor.
class ExpertModel {
public:
    // Real backbones read <weights_dir>/<weight_name>.cdow; the toy backbone is generated from
    // kToyExpertSeed. Throws WeightsNotFound with an export hint when the file is missing.
    static ExpertModel load(BackboneId id, std::vector<int> taps, const std::filesystem::path& weights_dir);
    // Expert built from explicit tensors (tests, self-distillation checks).
    static ExpertModel from_state(BackboneId id, std::vector<int> taps,
                                  const std::vector<std::pair<std::string, Tensor>>& tensors);

    // Inference-mode forward; never mutates the weights.
    FeaturePyramid forward(const Tensor& batch) const;

    BackboneId backbone() const { return net_->id(); }
    const std::vector<int>& taps() const { return net_->taps(); }
    std::vector<LevelInfo> tap_info() const { return net_->tap_info(); }
    std::size_t parameter_count() const;
    std::uint64_t parameter_hash() const;
    std::vector<std::pair<std::string, Tensor>> state() const;

private:
    explicit ExpertModel(std::unique_ptr<Backbone> net) : net_(std::move(net)) {}
    // Shared between copies; nothing mutates it after construction.
    std::shared_ptr<Backbone> net_;
};

// Trainable feature extractor mirroring the expert's architecture, randomly initialised.
class ApprenticeModel {
public:
    ApprenticeModel(BackboneId id, std::vector<int> taps, std::uint64_t seed);
    ApprenticeModel(ApprenticeModel&&) noexcept = default;
    ApprenticeModel& operator=(ApprenticeModel&&) noexcept = default;

    // Training forward: batch statistics, activations recorded for backward().
    FeaturePyramid forward_train(const Tensor& batch);
    // Inference forward with running statistics; does not mutate the model.
    FeaturePyramid forward(const Tensor& batch) const;
    // One gradient tensor per tap (empty = zero); accumulates into parameter gradients.
    void backward(const std::vector<Tensor>& level_grads);
    void zero_grad();

    BackboneId backbone() const { return net_->id(); }
    const std::vector<int>& taps() const { return net_->taps(); }
    std::vector<LevelInfo> tap_info() const { return net_->tap_info(); }
    nn::StateList state() { return net_->state(); }
    std::size_t parameter_count() const;

    std::vector<std::pair<std::string, Tensor>> snapshot() const;
    void restore(const std::vector<std::pair<std::string, Tensor>>& tensors);

private:
    std::unique_ptr<Backbone> net_;
};

}  // namespace cdo
