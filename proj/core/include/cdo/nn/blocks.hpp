#pragma once

#include "cdo/nn/layers.hpp"

namespace cdo::nn {

// Residual blocks with torchvision/timm parameter naming
// (conv1, bn1, conv2, bn2[, conv3, bn3], downsample.{0,1}).

class BasicBlock final : public Module {
public:
    static constexpr int expansion = 1;

    BasicBlock(int inplanes, int planes, int stride, bool downsample);

    Tensor forward(const Tensor& x, const Pass& pass) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(const std::string& prefix, StateList& out) override;
    void clear_cache() override;

private:
    Conv2d conv1_, conv2_;
    BatchNorm2d bn1_, bn2_;
    ReLU act1_, act_out_;
    Sequential downsample_;
};

class Bottleneck final : public Module {
public:
    static constexpr int expansion = 4;

    Bottleneck(int inplanes, int planes, int stride, bool downsample, int base_width = 64);

    Tensor forward(const Tensor& x, const Pass& pass) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(const std::string& prefix, StateList& out) override;
    void clear_cache() override;

private:
    Conv2d conv1_, conv2_, conv3_;
    BatchNorm2d bn1_, bn2_, bn3_;
    ReLU act1_, act2_, act_out_;
    Sequential downsample_;
};

enum class BlockType { basic, bottleneck };

inline int block_expansion(BlockType t) { return t == BlockType::basic ? 1 : 4; }

// Stack of `blocks` residual blocks; the first carries the stride and a projection shortcut
// when the shape changes. Updates `inplanes` to the output channel count.
std::unique_ptr<Sequential> make_layer(BlockType type, int& inplanes, int planes, int blocks, int stride,
                                       int base_width = 64);

}  // namespace cdo::nn
