#include "cdo/features.hpp"

#include <cmath>
#include <cstring>

#include "cdo/archive.hpp"
#include "cdo/nn/layers.hpp"
#include "cdo/rng.hpp"

namespace cdo {

FeaturePyramid FeaturePyramid::item(int n) const {
    FeaturePyramid out;
    for (const auto& l : levels) out.levels.push_back(l.slice(n));
    return out;
}

Tensor normalize_level(const Tensor& level) {
    const Shape& s = level.shape();
    Tensor out(s);
    const std::size_t plane = s.plane();
    for (int n = 0; n < s.n; ++n) {
        const float* src = level.item(n);
        float* dst = out.item(n);
        for (std::size_t p = 0; p < plane; ++p) {
            double sq = 0.0;
            for (int c = 0; c < s.c; ++c) sq += static_cast<double>(src[c * plane + p]) * src[c * plane + p];
            const double denom = std::max(std::sqrt(sq), static_cast<double>(kFeatureNormEps));
            for (int c = 0; c < s.c; ++c) dst[c * plane + p] = static_cast<float>(src[c * plane + p] / denom);
        }
    }
    return out;
}

FeaturePyramid normalize_features(const FeaturePyramid& pyramid) {
    FeaturePyramid out;
    out.levels.reserve(pyramid.levels.size());
    for (const auto& l : pyramid.levels) out.levels.push_back(normalize_level(l));
    return out;
}

DiscrepancyField discrepancy(const FeaturePyramid& expert_hat, const FeaturePyramid& apprentice_hat,
                             DiscrepancyMode mode) {
    if (expert_hat.size() != apprentice_hat.size()) {
        throw ShapeError("discrepancy: pyramids have " + std::to_string(expert_hat.size()) + " and " +
                         std::to_string(apprentice_hat.size()) + " levels");
    }
    DiscrepancyField field;
    for (std::size_t i = 0; i < expert_hat.size(); ++i) {
        const Tensor& e = expert_hat.levels[i];
        const Tensor& a = apprentice_hat.levels[i];
        if (e.shape() != a.shape()) {
            throw ShapeError("discrepancy: level " + std::to_string(i) + " shape mismatch " + to_string(e.shape()) +
                             " vs " + to_string(a.shape()));
        }
        const Shape& s = e.shape();
        const std::size_t plane = s.plane();
        Tensor d(Shape{s.n, 1, s.h, s.w});
        for (int n = 0; n < s.n; ++n) {
            const float* ep = e.item(n);
            const float* ap = a.item(n);
            float* dp = d.item(n);
            for (std::size_t p = 0; p < plane; ++p) {
                double acc = 0.0;
                for (int c = 0; c < s.c; ++c) {
                    const double diff = static_cast<double>(ep[c * plane + p]) - ap[c * plane + p];
                    acc += diff * diff;
                }
                dp[p] = static_cast<float>(mode == DiscrepancyMode::squared ? acc : std::sqrt(acc));
            }
        }
        field.levels.push_back(std::move(d));
    }
    return field;
}

std::vector<Tensor> discrepancy_backward(const FeaturePyramid& apprentice_raw, const FeaturePyramid& expert_hat,
                                         const FeaturePyramid& apprentice_hat, const DiscrepancyField& field,
                                         const DiscrepancyField& grad_d, DiscrepancyMode mode) {
    std::vector<Tensor> grads;
    for (std::size_t i = 0; i < apprentice_raw.size(); ++i) {
        const Tensor& raw = apprentice_raw.levels[i];
        const Tensor& e = expert_hat.levels[i];
        const Tensor& a = apprentice_hat.levels[i];
        const Tensor& d = field.levels[i];
        const Tensor& gd = grad_d.levels[i];
        const Shape& s = raw.shape();
        const std::size_t plane = s.plane();
        Tensor g(s);
        std::vector<double> v(static_cast<std::size_t>(s.c));
        for (int n = 0; n < s.n; ++n) {
            const float* rp = raw.item(n);
            const float* ep = e.item(n);
            const float* ap = a.item(n);
            float* gp = g.item(n);
            for (std::size_t p = 0; p < plane; ++p) {
                const double upstream = gd.item(n)[p];
                if (upstream == 0.0) continue;
                // d(d)/d(a_hat)
                double scale = -2.0;
                if (mode == DiscrepancyMode::euclidean) {
                    const double dist = d.item(n)[p];
                    scale = dist > 0.0 ? -1.0 / dist : 0.0;
                }
                double dot = 0.0, sq = 0.0;
                for (int c = 0; c < s.c; ++c) {
                    const std::size_t k = c * plane + p;
                    v[c] = upstream * scale * (static_cast<double>(ep[k]) - ap[k]);
                    dot += v[c] * ap[k];
                    sq += static_cast<double>(rp[k]) * rp[k];
                }
                const double norm = std::sqrt(sq);
                if (norm > kFeatureNormEps) {
                    for (int c = 0; c < s.c; ++c) {
                        const std::size_t k = c * plane + p;
                        gp[k] = static_cast<float>((v[c] - ap[k] * dot) / norm);
                    }
                } else {
                    for (int c = 0; c < s.c; ++c) gp[c * plane + p] = static_cast<float>(v[c] / kFeatureNormEps);
                }
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

std::uint64_t state_hash(const nn::StateList& state) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& s : state) {
        feed(s.name.data(), s.name.size());
        feed(s.value->data(), s.value->numel() * sizeof(float));
    }
    return h;
}

// ---------------------------------------------------------------------------

ExpertModel ExpertModel::load(BackboneId id, std::vector<int> taps, const std::filesystem::path& weights_dir) {
    auto net = make_backbone(id, std::move(taps));
    auto state = net->state();
    if (id == BackboneId::toy) {
        Rng rng(kToyExpertSeed);
        nn::reset_state(state, rng);
        return ExpertModel(std::move(net));
    }
    const std::string stem(backbone_weight_name(id));
    const auto path = weights_dir / (stem + ".cdow");
    if (!std::filesystem::exists(path)) {
        throw WeightsNotFound("pretrained weights for " + std::string(backbone_label(id)) + " not found at " +
                              path.string() + "; export them with: python3 tools/export_timm_weights.py --model " +
                              stem + " --out " + weights_dir.string());
    }
    const Archive archive = load_archive(path);
    restore_state(state, archive.tensors);
    return ExpertModel(std::move(net));
}

ExpertModel ExpertModel::from_state(BackboneId id, std::vector<int> taps,
                                    const std::vector<std::pair<std::string, Tensor>>& tensors) {
    auto net = make_backbone(id, std::move(taps));
    auto state = net->state();
    restore_state(state, tensors);
    return ExpertModel(std::move(net));
}

FeaturePyramid ExpertModel::forward(const Tensor& batch) const {
    return FeaturePyramid{net_->forward(batch, nn::Pass::inference())};
}

std::size_t ExpertModel::parameter_count() const { return net_->parameter_count(); }
std::uint64_t ExpertModel::parameter_hash() const { return state_hash(net_->state()); }
std::vector<std::pair<std::string, Tensor>> ExpertModel::state() const { return capture_state(net_->state()); }

ApprenticeModel::ApprenticeModel(BackboneId id, std::vector<int> taps, std::uint64_t seed)
    : net_(make_backbone(id, std::move(taps))) {
    auto state = net_->state();
    Rng rng = make_rng(seed, {0xa99e});
    nn::reset_state(state, rng);
}

FeaturePyramid ApprenticeModel::forward_train(const Tensor& batch) {
    return FeaturePyramid{net_->forward(batch, nn::Pass::train())};
}

FeaturePyramid ApprenticeModel::forward(const Tensor& batch) const {
    return FeaturePyramid{net_->forward(batch, nn::Pass::inference())};
}

void ApprenticeModel::backward(const std::vector<Tensor>& level_grads) {
    net_->backward(level_grads);
    net_->clear_cache();
}

void ApprenticeModel::zero_grad() {
    for (auto& s : net_->state())
        if (s.grad) s.grad->zero();
}

std::size_t ApprenticeModel::parameter_count() const { return net_->parameter_count(); }

std::vector<std::pair<std::string, Tensor>> ApprenticeModel::snapshot() const {
    return capture_state(net_->state());
}

void ApprenticeModel::restore(const std::vector<std::pair<std::string, Tensor>>& tensors) {
    auto state = net_->state();
    restore_state(state, tensors);
}

}  // namespace cdo
