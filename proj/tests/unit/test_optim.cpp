#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cdo/optim.hpp"

using namespace cdo;

namespace {

// Double-precision transcription of the decoupled-decay Adam update.
struct ReferenceAdamW {
    AdamWOptions o;
    std::vector<double> p, m, v;
    int t = 0;

    void step(const std::vector<double>& g) {
        ++t;
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] -= o.lr * o.weight_decay * p[i];
            m[i] = o.beta1 * m[i] + (1 - o.beta1) * g[i];
            v[i] = o.beta2 * v[i] + (1 - o.beta2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(o.beta1, t));
            const double vh = v[i] / (1 - std::pow(o.beta2, t));
            p[i] -= o.lr * mh / (std::sqrt(vh) + o.eps);
        }
    }
};

}  // namespace

TEST(AdamW, MatchesReferenceUpdate) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    nn::Parameter w(Shape{1, 3, 2, 2});
    for (auto& x : w.value.values()) x = static_cast<float>(u(rng));
    nn::StateList state{{"w", &w.value, &w.grad, nn::Role::conv_weight}};

    AdamWOptions opt;
    opt.lr = 1e-2;
    opt.weight_decay = 0.1;
    AdamW adam(state, opt);
    ReferenceAdamW ref{opt, {}, std::vector<double>(12, 0.0), std::vector<double>(12, 0.0)};
    for (float x : w.value.values()) ref.p.push_back(x);

    for (int step = 0; step < 50; ++step) {
        std::vector<double> g(12);
        for (std::size_t i = 0; i < 12; ++i) {
            g[i] = u(rng) * (i % 3 == 0 ? 1e-3 : 1.0);
            w.grad.data()[i] = static_cast<float>(g[i]);
        }
        adam.step();
        ref.step(g);
    }
    EXPECT_EQ(adam.steps(), 50);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(w.value.data()[i], ref.p[i], 1e-5) << i;
}

TEST(AdamW, SkipsBuffersAndZeroesGrads) {
    nn::Parameter w(Shape{1, 1, 1, 4});
    Tensor running(Shape{1, 1, 1, 4}, 3.0f);
    w.grad.fill(1.0f);
    nn::StateList state{{"w", &w.value, &w.grad, nn::Role::conv_weight},
                        {"rm", &running, nullptr, nn::Role::running_mean}};
    AdamW adam(state, {});
    adam.step();
    for (float x : running.values()) EXPECT_EQ(x, 3.0f);
    for (float x : w.value.values()) EXPECT_LT(x, 0.0f);
    adam.zero_grad();
    for (float x : w.grad.values()) EXPECT_EQ(x, 0.0f);
}

TEST(AdamW, MinimisesQuadratic) {
    nn::Parameter w(Shape{1, 1, 1, 3});
    const float target[3] = {0.5f, -1.0f, 2.0f};
    nn::StateList state{{"w", &w.value, &w.grad, nn::Role::conv_weight}};
    AdamWOptions opt;
    opt.lr = 0.05;
    opt.weight_decay = 0.0;
    AdamW adam(state, opt);
    for (int step = 0; step < 2000; ++step) {
        for (int i = 0; i < 3; ++i) w.grad.data()[i] = 2.0f * (w.value.data()[i] - target[i]);
        adam.step();
    }
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(w.value.data()[i], target[i], 1e-3);
}
