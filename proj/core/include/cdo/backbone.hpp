#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdo/nn/module.hpp"

namespace cdo {

enum class BackboneId { hr18, hr32, hr48, res18, res34, res50, wres50, toy };

// Short id used in configs ("HR32", "Res18", ...).
std::string_view backbone_label(BackboneId id);
// Canonical weight-file stem ("hrnet_w32", "resnet18", ...).
std::string_view backbone_weight_name(BackboneId id);
// Accepts either the short label or the weight-file stem, case-insensitively.
BackboneId parse_backbone(std::string_view text);
std::vector<BackboneId> all_backbones();

struct LevelInfo {
    int channels = 0;
    int stride = 0;
};

// Multi-hierarchy feature extractor. Hierarchy index 0 is the stride-2 stem output; indices
// 1..4 follow the stride-4..32 stages (timm features_only numbering). Only the layers up to the
// deepest requested hierarchy are built.
class Backbone {
public:
    virtual ~Backbone() = default;

    virtual BackboneId id() const = 0;
    const std::vector<int>& taps() const { return taps_; }
    // Channel count and stride of each tapped hierarchy, in tap order.
    std::vector<LevelInfo> tap_info() const;
    virtual LevelInfo level_info(int hierarchy) const = 0;
    virtual int max_hierarchy() const = 0;

    // Features of every tapped hierarchy, in tap order.
    virtual std::vector<Tensor> forward(const Tensor& x, const nn::Pass& pass) = 0;
    // Backpropagates per-tap gradients through the last recorded forward. An empty tensor
    // means a zero gradient for that tap.
    virtual void backward(std::span<const Tensor> tap_grads) = 0;
    virtual void clear_cache() = 0;

    // All parameters and buffers with timm-compatible names.
    nn::StateList state();
    std::size_t parameter_count();

protected:
    explicit Backbone(std::vector<int> taps);
    virtual void collect(nn::StateList& out) = 0;

    std::vector<int> taps_;
};

// Throws std::invalid_argument for taps outside [0, 4] (or [0, 3] for the toy network).
std::unique_ptr<Backbone> make_backbone(BackboneId id, std::vector<int> taps);

}  // namespace cdo
