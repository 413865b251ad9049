#include "cdo/optim.hpp"

#include <cmath>

namespace cdo {

AdamW::AdamW(nn::StateList params, AdamWOptions opt) : opt_(opt) {
    for (auto& p : params)
        if (p.trainable()) params_.push_back(p);
    for (const auto& p : params_) {
        m_.emplace_back(p.value->numel(), 0.0f);
        v_.emplace_back(p.value->numel(), 0.0f);
    }
}

void AdamW::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const float step_size = static_cast<float>(opt_.lr / bc1);
    const float sqrt_bc2 = static_cast<float>(std::sqrt(bc2));
    const float decay = static_cast<float>(1.0 - opt_.lr * opt_.weight_decay);
    const float b1 = static_cast<float>(opt_.beta1), b2 = static_cast<float>(opt_.beta2);
    const float eps = static_cast<float>(opt_.eps);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        float* p = params_[k].value->data();
        const float* g = params_[k].grad->data();
        float* m = m_[k].data();
        float* v = v_[k].data();
        const std::size_t n = params_[k].value->numel();
        for (std::size_t i = 0; i < n; ++i) {
            p[i] *= decay;
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            p[i] -= step_size * m[i] / (std::sqrt(v[i]) / sqrt_bc2 + eps);
        }
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) p.grad->zero();
}

}  // namespace cdo
