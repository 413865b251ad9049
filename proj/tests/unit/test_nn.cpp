#include <gtest/gtest.h>

#include <cmath>

#include "cdo/backbone.hpp"
#include "cdo/nn/blocks.hpp"
#include "cdo/nn/layers.hpp"
#include "test_util.hpp"

using namespace cdo;
using namespace cdo::nn;

namespace {

// Scalar objective sum(r * f(x)) used for finite-difference checks.
double objective(Module& m, const Tensor& x, const Tensor& r, const Pass& pass) {
    const Tensor y = m.forward(x, pass);
    double s = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += static_cast<double>(y.data()[i]) * r.data()[i];
    return s;
}

// Central differences on a handful of entries of `target`; returns the worst relative error.
double fd_check(Module& m, Tensor& x, const Tensor& r, Tensor& target, const Tensor& analytic, const Pass& pass,
                int probes = 12, float h = 1e-2f) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> pick(0, target.numel() - 1);
    double worst = 0;
    for (int i = 0; i < probes; ++i) {
        const std::size_t k = pick(rng);
        const float keep = target.data()[k];
        target.data()[k] = keep + h;
        const double up = objective(m, x, r, pass);
        target.data()[k] = keep - h;
        const double down = objective(m, x, r, pass);
        target.data()[k] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.data()[k];
        worst = std::max(worst, std::abs(numeric - a) / std::max(1e-2, std::abs(numeric) + std::abs(a)));
    }
    return worst;
}

}  // namespace

TEST(Conv2d, MatchesDirectConvolution) {
    std::mt19937_64 rng(1);
    for (auto opt : {ConvOptions{3, 5, 3, 1, 1, true}, ConvOptions{4, 6, 3, 2, 1, false},
                     ConvOptions{2, 3, 7, 2, 3, false}, ConvOptions{5, 4, 1, 1, 0, true}, ConvOptions{3, 2, 1, 2, 0, false}}) {
        Conv2d conv(opt);
        Rng init(2);
        conv.reset_parameters(init);
        for (auto& v : conv.bias().value.values()) v = 0.1f;
        const Tensor x = test::random_tensor({2, opt.in_channels, 9, 11}, rng);
        const Tensor y = conv.forward(x, Pass::inference());
        const Shape os = conv.output_shape(x.shape());
        ASSERT_EQ(y.shape(), os);
        const Tensor& w = conv.weight().value;
        for (int n = 0; n < os.n; ++n)
            for (int o = 0; o < os.c; ++o)
                for (int oy = 0; oy < os.h; ++oy)
                    for (int ox = 0; ox < os.w; ++ox) {
                        double acc = opt.bias ? 0.1 : 0.0;
                        for (int c = 0; c < opt.in_channels; ++c)
                            for (int ky = 0; ky < opt.kernel; ++ky)
                                for (int kx = 0; kx < opt.kernel; ++kx) {
                                    const int iy = oy * opt.stride - opt.padding + ky;
                                    const int ix = ox * opt.stride - opt.padding + kx;
                                    if (iy < 0 || ix < 0 || iy >= 9 || ix >= 11) continue;
                                    acc += static_cast<double>(w.at(o, c, ky, kx)) * x.at(n, c, iy, ix);
                                }
                        ASSERT_NEAR(y.at(n, o, oy, ox), acc, 1e-4);
                    }
    }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(3);
    Conv2d conv({3, 4, 3, 2, 1, true});
    Rng init(4);
    conv.reset_parameters(init);
    Tensor x = test::random_tensor({2, 3, 7, 7}, rng);
    const Tensor r = test::random_tensor(conv.output_shape(x.shape()), rng);
    conv.forward(x, Pass::train());
    const Tensor gx = conv.backward(r);
    EXPECT_LT(fd_check(conv, x, r, x, gx, Pass::inference()), 1e-2);
    EXPECT_LT(fd_check(conv, x, r, conv.weight().value, conv.weight().grad, Pass::inference()), 1e-2);
    EXPECT_LT(fd_check(conv, x, r, conv.bias().value, conv.bias().grad, Pass::inference()), 1e-2);
}

TEST(BatchNorm2d, TrainingNormalisesAndUpdatesRunningStats) {
    std::mt19937_64 rng(5);
    BatchNorm2d bn(3);
    const Tensor x = test::random_tensor({4, 3, 5, 5}, rng, 1.0f, 3.0f);
    const Tensor y = bn.forward(x, Pass::train());
    for (int c = 0; c < 3; ++c) {
        double s = 0, sq = 0, xs = 0, xsq = 0;
        const int m = 4 * 25;
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 25; ++i) {
                const double v = y.item(n)[c * 25 + i], u = x.item(n)[c * 25 + i];
                s += v, sq += v * v, xs += u, xsq += u * u;
            }
        EXPECT_NEAR(s / m, 0.0, 1e-5);
        EXPECT_NEAR(sq / m, 1.0, 1e-3);
        const double mean = xs / m, var_unbiased = (xsq - m * mean * mean) / (m - 1);
        EXPECT_NEAR(bn.running_mean().data()[c], 0.1 * mean, 1e-5);
        EXPECT_NEAR(bn.running_var().data()[c], 0.9 + 0.1 * var_unbiased, 1e-4);
    }
}

TEST(BatchNorm2d, InferenceUsesRunningStatsAndDoesNotMutate) {
    std::mt19937_64 rng(6);
    BatchNorm2d bn(2);
    bn.running_mean().data()[0] = 1.0f, bn.running_var().data()[0] = 4.0f;
    bn.weight().value.data()[0] = 3.0f, bn.bias().value.data()[0] = 0.5f;
    const Tensor x = test::random_tensor({1, 2, 2, 2}, rng);
    const Tensor y = bn.forward(x, Pass::inference());
    for (int i = 0; i < 4; ++i)
        EXPECT_NEAR(y.data()[i], 3.0f * (x.data()[i] - 1.0f) / std::sqrt(4.0f + 1e-5f) + 0.5f, 1e-5f);
    EXPECT_EQ(bn.running_mean().data()[0], 1.0f);
    EXPECT_EQ(bn.running_var().data()[0], 4.0f);
}

TEST(BatchNorm2d, GradientsMatchFiniteDifferencesInBothModes) {
    std::mt19937_64 rng(7);
    for (bool training : {true, false}) {
        BatchNorm2d bn(3);
        for (auto& v : bn.weight().value.values()) v = 1.5f;
        bn.running_var().fill(2.0f);
        Tensor x = test::random_tensor({3, 3, 4, 4}, rng);
        const Tensor r = test::random_tensor(x.shape(), rng);
        // Objective passes must not drift the running statistics.
        const Pass probe{training, false};
        BatchNorm2d ref = bn;
        bn.forward(x, Pass{training, true});
        const Tensor gx = bn.backward(r);
        EXPECT_LT(fd_check(ref, x, r, x, gx, probe), 2e-2) << "training=" << training;
        EXPECT_LT(fd_check(ref, x, r, ref.weight().value, bn.weight().grad, probe), 2e-2);
    }
}

TEST(MaxPool2d, ForwardAndBackwardRouteToArgmax) {
    MaxPool2d pool(3, 2, 1);
    Tensor x(Shape{1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) x.data()[i] = static_cast<float>(i);
    const Tensor y = pool.forward(x, Pass::train());
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_EQ(y.storage(), (std::vector<float>{5, 7, 13, 15}));
    const Tensor g = pool.backward(Tensor(y.shape(), 1.0f));
    EXPECT_EQ(g.data()[5], 1.0f);
    EXPECT_EQ(g.data()[15], 1.0f);
    EXPECT_EQ(g.data()[0], 0.0f);
}

TEST(Blocks, BottleneckGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(8);
    Bottleneck block(8, 4, 2, true);
    StateList st;
    block.collect("", st);
    Rng init(9);
    reset_state(st, init);
    Tensor x = test::random_tensor({2, 8, 6, 6}, rng);
    const Tensor r = test::random_tensor({2, 16, 3, 3}, rng);
    block.forward(x, Pass{false, true});
    const Tensor gx = block.backward(r);
    EXPECT_LT(fd_check(block, x, r, x, gx, Pass::inference(), 12, 1e-3f), 2e-2);
}

TEST(ResetState, IsDeterministicAndFollowsRoles) {
    Bottleneck a(8, 4, 1, true), b(8, 4, 1, true);
    StateList sa, sb;
    a.collect("", sa);
    b.collect("", sb);
    Rng ra(1), rb(1);
    reset_state(sa, ra);
    reset_state(sb, rb);
    ASSERT_EQ(sa.size(), sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        EXPECT_EQ(sa[i].value->storage(), sb[i].value->storage()) << sa[i].name;
        if (sa[i].role == Role::norm_scale || sa[i].role == Role::running_var)
            for (float v : sa[i].value->values()) EXPECT_EQ(v, 1.0f);
        if (sa[i].role == Role::shift || sa[i].role == Role::running_mean)
            for (float v : sa[i].value->values()) EXPECT_EQ(v, 0.0f);
    }
}

// Shapes of every hierarchy for a 256x256 input, taken from the published stride schedules
// (stem stride 2, stages at strides 4..32) and channel widths.
TEST(Backbone, LevelScheduleFixture) {
    struct Row {
        BackboneId id;
        std::array<int, 5> channels;
    };
    const Row rows[] = {
        {BackboneId::res18, {64, 64, 128, 256, 512}},     {BackboneId::res34, {64, 64, 128, 256, 512}},
        {BackboneId::res50, {64, 256, 512, 1024, 2048}},  {BackboneId::wres50, {64, 256, 512, 1024, 2048}},
        {BackboneId::hr18, {64, 128, 256, 512, 1024}},    {BackboneId::hr32, {64, 128, 256, 512, 1024}},
        {BackboneId::hr48, {64, 128, 256, 512, 1024}},
    };
    for (const auto& row : rows) {
        auto net = make_backbone(row.id, {0, 1, 2, 3, 4});
        const auto info = net->tap_info();
        const std::array<int, 5> sizes{128, 64, 32, 16, 8};
        for (int h = 0; h < 5; ++h) {
            EXPECT_EQ(info[h].channels, row.channels[h]) << backbone_label(row.id) << " level " << h;
            EXPECT_EQ(256 / info[h].stride, sizes[h]);
        }
    }
}

TEST(Backbone, ForwardShapesAgreeWithSchedule) {
    std::mt19937_64 rng(10);
    const Tensor x = test::random_tensor({1, 3, 64, 64}, rng);
    for (BackboneId id : {BackboneId::res18, BackboneId::res50, BackboneId::hr18, BackboneId::toy}) {
        const std::vector<int> taps = id == BackboneId::toy ? std::vector<int>{0, 1, 2, 3} : std::vector<int>{1, 2, 3};
        auto net = make_backbone(id, taps);
        auto st = net->state();
        Rng init(11);
        reset_state(st, init);
        const auto feats = net->forward(x, Pass::inference());
        const auto info = net->tap_info();
        ASSERT_EQ(feats.size(), taps.size());
        for (std::size_t i = 0; i < feats.size(); ++i) {
            EXPECT_EQ(feats[i].shape(), (Shape{1, info[i].channels, 64 / info[i].stride, 64 / info[i].stride}))
                << backbone_label(id) << " tap " << taps[i];
        }
    }
}

TEST(Backbone, ToyBackboneGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(12);
    auto net = make_backbone(BackboneId::toy, {1, 2, 3});
    auto st = net->state();
    Rng init(13);
    reset_state(st, init);
    const Tensor x = test::random_tensor({2, 3, 16, 16}, rng);
    const auto feats = net->forward(x, Pass::train());
    std::vector<Tensor> rs;
    for (const auto& f : feats) rs.push_back(test::random_tensor(f.shape(), rng));
    for (auto& s : st)
        if (s.grad) s.grad->zero();
    net->backward(rs);
    net->clear_cache();

    auto objective_all = [&]() {
        const auto fs = net->forward(x, Pass{true, false});
        double s = 0;
        for (std::size_t l = 0; l < fs.size(); ++l)
            for (std::size_t i = 0; i < fs[l].numel(); ++i) s += static_cast<double>(fs[l].data()[i]) * rs[l].data()[i];
        return s;
    };
    std::uniform_int_distribution<int> pick_tensor(0, static_cast<int>(st.size()) - 1);
    int checked = 0;
    double worst = 0;
    while (checked < 15) {
        auto& s = st[pick_tensor(rng)];
        if (!s.trainable()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, s.value->numel() - 1);
        const std::size_t k = pick(rng);
        const float keep = s.value->data()[k];
        const float h = 1e-3f;  // larger steps cross ReLU kinks
        s.value->data()[k] = keep + h;
        const double up = objective_all();
        s.value->data()[k] = keep - h;
        const double down = objective_all();
        s.value->data()[k] = keep;
        const double numeric = (up - down) / (2 * h), a = s.grad->data()[k];
        worst = std::max(worst, std::abs(numeric - a) / std::max(1e-1, std::abs(numeric) + std::abs(a)));
        ++checked;
    }
    EXPECT_LT(worst, 3e-2);
}

TEST(Backbone, RejectsInvalidTaps) {
    EXPECT_THROW(make_backbone(BackboneId::toy, {1, 4}), std::invalid_argument);
    EXPECT_THROW(make_backbone(BackboneId::res18, {5}), std::invalid_argument);
    EXPECT_THROW(make_backbone(BackboneId::res18, {}), std::invalid_argument);
}

TEST(Backbone, ParsesLabelsAndWeightNames) {
    EXPECT_EQ(parse_backbone("HR32"), BackboneId::hr32);
    EXPECT_EQ(parse_backbone("wide_resnet50_2"), BackboneId::wres50);
    EXPECT_EQ(parse_backbone("res18"), BackboneId::res18);
    EXPECT_THROW(parse_backbone("vgg16"), std::invalid_argument);
    for (BackboneId id : all_backbones()) EXPECT_EQ(parse_backbone(backbone_label(id)), id);
}

TEST(Backbone, TimmParameterNames) {
    auto r = make_backbone(BackboneId::res18, {1, 2, 3});
    const auto st = r->state();
    auto has = [&](const std::string& n) {
        return std::any_of(st.begin(), st.end(), [&](const NamedTensor& t) { return t.name == n; });
    };
    EXPECT_TRUE(has("conv1.weight"));
    EXPECT_TRUE(has("layer2.0.downsample.0.weight"));
    EXPECT_TRUE(has("layer3.1.bn2.running_var"));
    EXPECT_FALSE(has("layer4.0.conv1.weight"));  // deeper than the last tap
    auto h = make_backbone(BackboneId::hr18, {1, 2, 3});
    const auto hs = h->state();
    EXPECT_TRUE(std::any_of(hs.begin(), hs.end(), [](const NamedTensor& t) {
        return t.name == "stage3.0.fuse_layers.2.0.0.0.weight";
    }));
    EXPECT_TRUE(std::any_of(hs.begin(), hs.end(),
                            [](const NamedTensor& t) { return t.name == "incre_modules.2.0.conv1.weight"; }));
}
