#pragma once

#include <vector>

#include "cdo/nn/module.hpp"

namespace cdo {

struct AdamWOptions {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

// Adam with decoupled weight decay: p <- p - lr*wd*p, then the bias-corrected Adam step.
// Applies to every trainable tensor of the state list it was built from.
class AdamW {
public:
    AdamW(nn::StateList params, AdamWOptions opt);

    void step();
    void zero_grad();
    long steps() const { return t_; }
    const AdamWOptions& options() const { return opt_; }

private:
    nn::StateList params_;
    AdamWOptions opt_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    long t_ = 0;
};

}  // namespace cdo
