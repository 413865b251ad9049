#pragma once

#include <cstdint>
#include <vector>

#include "cdo/nn/module.hpp"
#include "cdo/rng.hpp"

namespace cdo::nn {

struct ConvOptions {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
    bool bias = false;
};

// 2-D convolution via im2col + GEMM. Weight layout: out × in × k × k.
class Conv2d final : public Module {
public:
    explicit Conv2d(const ConvOptions& opt);

    Tensor forward(const Tensor& x, const Pass& pass) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(const std::string& prefix, StateList& out) override;
    void clear_cache() override { input_ = Tensor(); }

    // Kaiming-normal (fan_out, ReLU gain) weights; zero bias.
    void reset_parameters(Rng& rng);

    const ConvOptions& options() const { return opt_; }
    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }
    Shape output_shape(const Shape& in) const;

private:
    ConvOptions opt_;
    Parameter weight_;
    Parameter bias_;
    Tensor input_;
};

class BatchNorm2d final : public Module {
public:
    explicit BatchNorm2d(int channels, float eps = 1e-5f, float momentum = 0.1f);

    Tensor forward(const Tensor& x, const Pass& pass) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(const std::string& prefix, StateList& out) override;
    void clear_cache() override {
        normalized_ = Tensor();
        inv_std_.clear();
    }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }
    Tensor& running_mean() { return running_mean_; }
    Tensor& running_var() { return running_var_; }

private:
    int channels_;
    float eps_;
    float momentum_;
    Parameter weight_;
    Parameter bias_;
    Tensor running_mean_;
    Tensor running_var_;
    // recorded
    Tensor normalized_;
    std::vector<float> inv_std_;
    bool batch_stats_ = false;
};

class ReLU final : public Module {
public:
    Tensor forward(const Tensor& x, const Pass& pass) override;
    Tensor backward(const Tensor& grad_out) override;
    void clear_cache() override { output_ = Tensor(); }

private:
    Tensor output_;
};

class MaxPool2d final : public Module {
public:
    MaxPool2d(int kernel, int stride, int padding) : kernel_(kernel), stride_(stride), padding_(padding) {}

    Tensor forward(const Tensor& x, const Pass& pass) override;
    Tensor backward(const Tensor& grad_out) override;
    void clear_cache() override { argmax_.clear(); }

private:
    int kernel_, stride_, padding_;
    Shape in_shape_{};
    std::vector<std::uint32_t> argmax_;
};

// Nearest-neighbour upsampling by an integer factor.
class UpsampleNearest final : public Module {
public:
    explicit UpsampleNearest(int factor) : factor_(factor) {}

    Tensor forward(const Tensor& x, const Pass& pass) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    int factor_;
};

ModulePtr conv(int in, int out, int kernel, int stride, int padding, bool bias = false);
ModulePtr conv3x3(int in, int out, int stride = 1);
ModulePtr conv1x1(int in, int out, int stride = 1);
ModulePtr batch_norm(int channels);
ModulePtr relu();

// Kaiming-normal (fan_out) convolution weights, unit norm scales, zero shifts and running
// statistics (0, 1). Visits tensors in `state` order, so the result is deterministic in `rng`.
void reset_state(StateList& state, Rng& rng);

std::size_t count_parameters(const StateList& state);

}  // namespace cdo::nn
