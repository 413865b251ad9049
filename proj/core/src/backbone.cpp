#include "cdo/backbone.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>

#include "cdo/nn/blocks.hpp"
#include "cdo/nn/layers.hpp"

namespace cdo {

namespace {

struct BackboneName {
    BackboneId id;
    std::string_view label;
    std::string_view weight_name;
};

constexpr std::array<BackboneName, 8> kNames{{
    {BackboneId::hr18, "HR18", "hrnet_w18"},
    {BackboneId::hr32, "HR32", "hrnet_w32"},
    {BackboneId::hr48, "HR48", "hrnet_w48"},
    {BackboneId::res18, "Res18", "resnet18"},
    {BackboneId::res34, "Res34", "resnet34"},
    {BackboneId::res50, "Res50", "resnet50"},
    {BackboneId::wres50, "WRes50", "wide_resnet50_2"},
    {BackboneId::toy, "Toy", "toy"},
}};

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

const BackboneName& lookup(BackboneId id) {
    for (const auto& n : kNames)
        if (n.id == id) return n;
    throw std::logic_error("unknown backbone id");
}

void add_tensors(Tensor& acc, const Tensor& g) {
    if (g.empty()) return;
    if (acc.empty()) {
        acc = g;
    } else {
        acc += g;
    }
}

// ---------------------------------------------------------------------------
// Backbones that are a plain chain of stages, each optionally tapped.

class ChainBackbone : public Backbone {
public:
    ChainBackbone(BackboneId id, std::vector<int> taps) : Backbone(std::move(taps)), id_(id) {}

    BackboneId id() const override { return id_; }
    int max_hierarchy() const override { return static_cast<int>(levels_.size()) - 1; }
    LevelInfo level_info(int h) const override { return levels_.at(static_cast<std::size_t>(h)); }

    std::vector<Tensor> forward(const Tensor& x, const nn::Pass& pass) override {
        std::vector<Tensor> out;
        out.reserve(taps_.size());
        Tensor cur = x;
        for (std::size_t k = 0; k < stages_.size(); ++k) {
            cur = stages_[k]->forward(cur, pass);
            if (std::find(taps_.begin(), taps_.end(), static_cast<int>(k)) != taps_.end()) out.push_back(cur);
        }
        return out;
    }

    void backward(std::span<const Tensor> tap_grads) override {
        if (tap_grads.size() != taps_.size()) throw ShapeError("backbone backward: one gradient per tap expected");
        Tensor g;
        for (int k = static_cast<int>(stages_.size()) - 1; k >= 0; --k) {
            const auto it = std::find(taps_.begin(), taps_.end(), k);
            if (it != taps_.end()) add_tensors(g, tap_grads[static_cast<std::size_t>(it - taps_.begin())]);
            if (g.empty()) continue;
            if (k == 0) {
                stages_[0]->backward(g);
            } else {
                g = stages_[static_cast<std::size_t>(k)]->backward(g);
            }
        }
    }

    void clear_cache() override {
        for (auto& s : stages_) s->clear_cache();
    }

protected:
    void collect(nn::StateList& out) override {
        for (auto& s : stages_) s->collect("", out);
    }

    void add_stage(std::unique_ptr<nn::Module> stage, LevelInfo info) {
        if (static_cast<int>(stages_.size()) > taps_.back()) return;
        stages_.push_back(std::move(stage));
        levels_.push_back(info);
    }

    BackboneId id_;
    std::vector<std::unique_ptr<nn::Module>> stages_;
    std::vector<LevelInfo> levels_;
};

class ResNetBackbone final : public ChainBackbone {
public:
    ResNetBackbone(BackboneId id, std::vector<int> taps) : ChainBackbone(id, std::move(taps)) {
        nn::BlockType type = nn::BlockType::basic;
        std::array<int, 4> blocks{2, 2, 2, 2};
        int base_width = 64;
        switch (id) {
            case BackboneId::res18: break;
            case BackboneId::res34: blocks = {3, 4, 6, 3}; break;
            case BackboneId::res50:
                type = nn::BlockType::bottleneck;
                blocks = {3, 4, 6, 3};
                break;
            case BackboneId::wres50:
                type = nn::BlockType::bottleneck;
                blocks = {3, 4, 6, 3};
                base_width = 128;
                break;
            default: throw std::logic_error("not a ResNet backbone");
        }

        auto stem = std::make_unique<nn::Sequential>();
        stem->add("conv1", nn::conv(3, 64, 7, 2, 3));
        stem->add("bn1", nn::batch_norm(64));
        stem->add("", nn::relu());
        add_stage(std::move(stem), {64, 2});

        int inplanes = 64;
        const std::array<int, 4> planes{64, 128, 256, 512};
        for (int i = 0; i < 4; ++i) {
            auto stage = std::make_unique<nn::Sequential>();
            if (i == 0) stage->add("", std::make_unique<nn::MaxPool2d>(3, 2, 1));
            stage->add("layer" + std::to_string(i + 1),
                       nn::make_layer(type, inplanes, planes[i], blocks[i], i == 0 ? 1 : 2, base_width));
            add_stage(std::move(stage), {inplanes, 4 << i});
        }
    }
};

// Small four-stage residual network for desk-scale runs: stride-1 stem, then three stride-2
// basic blocks (hierarchies 1..3 at strides 2, 4, 8).
class ToyBackbone final : public ChainBackbone {
public:
    explicit ToyBackbone(std::vector<int> taps) : ChainBackbone(BackboneId::toy, std::move(taps)) {
        auto stem = std::make_unique<nn::Sequential>();
        stem->add("conv1", nn::conv3x3(3, 16));
        stem->add("bn1", nn::batch_norm(16));
        stem->add("", nn::relu());
        add_stage(std::move(stem), {16, 1});
        int inplanes = 16;
        const std::array<int, 3> widths{24, 32, 48};
        for (int i = 0; i < 3; ++i) {
            auto stage = std::make_unique<nn::Sequential>();
            stage->add("layer" + std::to_string(i + 1),
                       nn::make_layer(nn::BlockType::basic, inplanes, widths[i], 1, 2));
            add_stage(std::move(stage), {inplanes, 2 << i});
        }
    }
};

// ---------------------------------------------------------------------------
// HRNet (timm layout, incremental-head features).

struct HrStageConfig {
    int modules;
    int branches;
    std::vector<int> channels;
};

class HighResolutionModule {
public:
    HighResolutionModule(int branches, const std::vector<int>& in_channels, const std::vector<int>& channels)
        : branches_(branches), channels_(channels) {
        for (int i = 0; i < branches; ++i) {
            int inplanes = in_channels[static_cast<std::size_t>(i)];
            branch_.push_back(nn::make_layer(nn::BlockType::basic, inplanes, channels[static_cast<std::size_t>(i)], 4, 1));
        }
        fuse_.resize(static_cast<std::size_t>(branches));
        for (int i = 0; i < branches; ++i) {
            for (int j = 0; j < branches; ++j) {
                const int ci = channels[static_cast<std::size_t>(i)];
                const int cj = channels[static_cast<std::size_t>(j)];
                std::unique_ptr<nn::Sequential> f;
                if (j > i) {
                    f = std::make_unique<nn::Sequential>();
                    f->add("0", nn::conv1x1(cj, ci));
                    f->add("1", nn::batch_norm(ci));
                    f->add("2", std::make_unique<nn::UpsampleNearest>(1 << (j - i)));
                } else if (j < i) {
                    f = std::make_unique<nn::Sequential>();
                    for (int k = 0; k < i - j; ++k) {
                        auto step = std::make_unique<nn::Sequential>();
                        const bool last = k == i - j - 1;
                        step->add("0", nn::conv(cj, last ? ci : cj, 3, 2, 1));
                        step->add("1", nn::batch_norm(last ? ci : cj));
                        if (!last) step->add("2", nn::relu());
                        f->add(std::move(step));
                    }
                }
                fuse_[static_cast<std::size_t>(i)].push_back(std::move(f));
            }
            act_.push_back(std::make_unique<nn::ReLU>());
        }
    }

    std::vector<Tensor> forward(std::vector<Tensor> x, const nn::Pass& pass) {
        for (int i = 0; i < branches_; ++i) x[i] = branch_[i]->forward(x[i], pass);
        if (branches_ == 1) return x;
        std::vector<Tensor> out;
        for (int i = 0; i < branches_; ++i) {
            Tensor y;
            for (int j = 0; j < branches_; ++j) {
                auto& f = fuse_[i][j];
                add_tensors(y, f ? f->forward(x[j], pass) : x[j]);
            }
            out.push_back(act_[i]->forward(y, pass));
        }
        return out;
    }

    std::vector<Tensor> backward(const std::vector<Tensor>& grad_out) {
        std::vector<Tensor> gx(static_cast<std::size_t>(branches_));
        if (branches_ == 1) {
            gx[0] = grad_out[0];
        } else {
            for (int i = 0; i < branches_; ++i) {
                if (grad_out[i].empty()) continue;
                const Tensor g = act_[i]->backward(grad_out[i]);
                for (int j = 0; j < branches_; ++j) {
                    auto& f = fuse_[i][j];
                    add_tensors(gx[j], f ? f->backward(g) : g);
                }
            }
        }
        std::vector<Tensor> gin(static_cast<std::size_t>(branches_));
        for (int i = 0; i < branches_; ++i) {
            if (!gx[i].empty()) gin[i] = branch_[i]->backward(gx[i]);
        }
        return gin;
    }

    void collect(const std::string& prefix, nn::StateList& out) {
        for (int i = 0; i < branches_; ++i)
            branch_[i]->collect(prefix + ".branches." + std::to_string(i), out);
        if (branches_ == 1) return;
        for (int i = 0; i < branches_; ++i)
            for (int j = 0; j < branches_; ++j)
                if (fuse_[i][j])
                    fuse_[i][j]->collect(prefix + ".fuse_layers." + std::to_string(i) + "." + std::to_string(j), out);
    }

    void clear_cache() {
        for (auto& b : branch_) b->clear_cache();
        for (auto& row : fuse_)
            for (auto& f : row)
                if (f) f->clear_cache();
        for (auto& a : act_) a->clear_cache();
    }

private:
    int branches_;
    std::vector<int> channels_;
    std::vector<std::unique_ptr<nn::Sequential>> branch_;
    std::vector<std::vector<std::unique_ptr<nn::Sequential>>> fuse_;
    std::vector<std::unique_ptr<nn::ReLU>> act_;
};

// Transition between stages: existing branches pass through (or get a 3x3 conv when the
// channel count changes); new branches are derived from the last previous branch with
// stride-2 convolutions.
class Transition {
public:
    Transition(const std::vector<int>& pre, const std::vector<int>& cur) : num_pre_(static_cast<int>(pre.size())) {
        for (std::size_t i = 0; i < cur.size(); ++i) {
            std::unique_ptr<nn::Sequential> t;
            if (static_cast<int>(i) < num_pre_) {
                if (cur[i] != pre[i]) {
                    t = std::make_unique<nn::Sequential>();
                    t->add("0", nn::conv(pre[i], cur[i], 3, 1, 1));
                    t->add("1", nn::batch_norm(cur[i]));
                    t->add("2", nn::relu());
                }
            } else {
                t = std::make_unique<nn::Sequential>();
                const int steps = static_cast<int>(i) + 1 - num_pre_;
                for (int j = 0; j < steps; ++j) {
                    const int in = pre.back();
                    const int out = j == static_cast<int>(i) - num_pre_ ? cur[i] : in;
                    auto step = std::make_unique<nn::Sequential>();
                    step->add("0", nn::conv(in, out, 3, 2, 1));
                    step->add("1", nn::batch_norm(out));
                    step->add("2", nn::relu());
                    t->add(std::move(step));
                }
            }
            layers_.push_back(std::move(t));
        }
    }

    // First transition: every branch is derived from the single stage-1 output.
    std::vector<Tensor> forward_single(const Tensor& x, const nn::Pass& pass) {
        std::vector<Tensor> out;
        for (auto& t : layers_) out.push_back(t ? t->forward(x, pass) : x);
        return out;
    }

    Tensor backward_single(const std::vector<Tensor>& g) {
        Tensor acc;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (g[i].empty()) continue;
            add_tensors(acc, layers_[i] ? layers_[i]->backward(g[i]) : g[i]);
        }
        return acc;
    }

    std::vector<Tensor> forward(const std::vector<Tensor>& y, const nn::Pass& pass) {
        std::vector<Tensor> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            out.push_back(layers_[i] ? layers_[i]->forward(y.back(), pass) : y[i]);
        return out;
    }

    std::vector<Tensor> backward(const std::vector<Tensor>& g) {
        std::vector<Tensor> gy(static_cast<std::size_t>(num_pre_));
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (g[i].empty()) continue;
            if (layers_[i]) {
                add_tensors(gy.back(), layers_[i]->backward(g[i]));
            } else {
                add_tensors(gy[i], g[i]);
            }
        }
        return gy;
    }

    void collect(const std::string& prefix, nn::StateList& out) {
        for (std::size_t i = 0; i < layers_.size(); ++i)
            if (layers_[i]) layers_[i]->collect(prefix + "." + std::to_string(i), out);
    }

    void clear_cache() {
        for (auto& l : layers_)
            if (l) l->clear_cache();
    }

private:
    int num_pre_;
    std::vector<std::unique_ptr<nn::Sequential>> layers_;
};

class HrnetBackbone final : public Backbone {
public:
    HrnetBackbone(BackboneId id, std::vector<int> taps) : Backbone(std::move(taps)), id_(id) {
        int c = 0;
        switch (id) {
            case BackboneId::hr18: c = 18; break;
            case BackboneId::hr32: c = 32; break;
            case BackboneId::hr48: c = 48; break;
            default: throw std::logic_error("not an HRNet backbone");
        }
        stem1_.add("conv1", nn::conv(3, 64, 3, 2, 1));
        stem1_.add("bn1", nn::batch_norm(64));
        stem1_.add("", nn::relu());
        if (taps_.back() == 0) return;

        stem2_.add("conv2", nn::conv(64, 64, 3, 2, 1));
        stem2_.add("bn2", nn::batch_norm(64));
        stem2_.add("", nn::relu());
        int inplanes = 64;
        layer1_ = nn::make_layer(nn::BlockType::bottleneck, inplanes, 64, 4, 1);

        const std::vector<HrStageConfig> cfg{
            {1, 2, {c, 2 * c}}, {4, 3, {c, 2 * c, 4 * c}}, {3, 4, {c, 2 * c, 4 * c, 8 * c}}};
        std::vector<int> pre{inplanes};
        for (std::size_t s = 0; s < cfg.size(); ++s) {
            transitions_.emplace_back(pre, cfg[s].channels);
            std::vector<HighResolutionModule> mods;
            for (int m = 0; m < cfg[s].modules; ++m) mods.emplace_back(cfg[s].branches, cfg[s].channels, cfg[s].channels);
            stages_.push_back(std::move(mods));
            pre = cfg[s].channels;
        }
        final_channels_ = pre;
        const std::array<int, 4> head{32, 64, 128, 256};
        for (int i = 0; i < 4; ++i) {
            int in = pre[static_cast<std::size_t>(i)];
            if (std::find(taps_.begin(), taps_.end(), i + 1) != taps_.end()) {
                incre_.push_back(nn::make_layer(nn::BlockType::bottleneck, in, head[static_cast<std::size_t>(i)], 1, 1));
            } else {
                incre_.push_back(nullptr);
            }
        }
    }

    BackboneId id() const override { return id_; }
    int max_hierarchy() const override { return 4; }
    LevelInfo level_info(int h) const override {
        if (h == 0) return {64, 2};
        static constexpr std::array<int, 4> head{128, 256, 512, 1024};
        return {head.at(static_cast<std::size_t>(h - 1)), 2 << h};
    }

    std::vector<Tensor> forward(const Tensor& x, const nn::Pass& pass) override {
        std::vector<Tensor> out;
        Tensor s = stem1_.forward(x, pass);
        if (taps_.front() == 0) out.push_back(s);
        if (taps_.back() == 0) return out;
        s = layer1_->forward(stem2_.forward(s, pass), pass);
        std::vector<Tensor> y = transitions_[0].forward_single(s, pass);
        for (std::size_t st = 0; st < stages_.size(); ++st) {
            if (st > 0) y = transitions_[st].forward(y, pass);
            for (auto& m : stages_[st]) y = m.forward(std::move(y), pass);
        }
        for (int t : taps_) {
            if (t == 0) continue;
            out.push_back(incre_[static_cast<std::size_t>(t - 1)]->forward(y[static_cast<std::size_t>(t - 1)], pass));
        }
        return out;
    }

    void backward(std::span<const Tensor> tap_grads) override {
        if (tap_grads.size() != taps_.size()) throw ShapeError("backbone backward: one gradient per tap expected");
        Tensor stem_grad;
        std::vector<Tensor> gy(4);
        for (std::size_t k = 0; k < taps_.size(); ++k) {
            const int t = taps_[k];
            if (tap_grads[k].empty()) continue;
            if (t == 0) {
                stem_grad = tap_grads[k];
            } else {
                gy[static_cast<std::size_t>(t - 1)] = incre_[static_cast<std::size_t>(t - 1)]->backward(tap_grads[k]);
            }
        }
        if (taps_.back() > 0) {
            for (int st = static_cast<int>(stages_.size()) - 1; st >= 0; --st) {
                auto& mods = stages_[static_cast<std::size_t>(st)];
                for (auto it = mods.rbegin(); it != mods.rend(); ++it) gy = it->backward(gy);
                if (st > 0) gy = transitions_[static_cast<std::size_t>(st)].backward(gy);
            }
            const Tensor g1 = transitions_[0].backward_single(gy);
            if (!g1.empty()) add_tensors(stem_grad, stem2_.backward(layer1_->backward(g1)));
        }
        if (!stem_grad.empty()) stem1_.backward(stem_grad);
    }

    void clear_cache() override {
        stem1_.clear_cache();
        stem2_.clear_cache();
        if (layer1_) layer1_->clear_cache();
        for (auto& t : transitions_) t.clear_cache();
        for (auto& st : stages_)
            for (auto& m : st) m.clear_cache();
        for (auto& i : incre_)
            if (i) i->clear_cache();
    }

protected:
    void collect(nn::StateList& out) override {
        stem1_.collect("", out);
        if (taps_.back() == 0) return;
        stem2_.collect("", out);
        layer1_->collect("layer1", out);
        for (std::size_t s = 0; s < stages_.size(); ++s) {
            transitions_[s].collect("transition" + std::to_string(s + 1), out);
            for (std::size_t m = 0; m < stages_[s].size(); ++m)
                stages_[s][m].collect("stage" + std::to_string(s + 2) + "." + std::to_string(m), out);
        }
        for (std::size_t i = 0; i < incre_.size(); ++i)
            if (incre_[i]) incre_[i]->collect("incre_modules." + std::to_string(i), out);
    }

private:
    BackboneId id_;
    nn::Sequential stem1_, stem2_;
    std::unique_ptr<nn::Sequential> layer1_;
    std::vector<Transition> transitions_;
    std::vector<std::vector<HighResolutionModule>> stages_;
    std::vector<std::unique_ptr<nn::Sequential>> incre_;
    std::vector<int> final_channels_;
};

}  // namespace

std::string_view backbone_label(BackboneId id) { return lookup(id).label; }
std::string_view backbone_weight_name(BackboneId id) { return lookup(id).weight_name; }

BackboneId parse_backbone(std::string_view text) {
    for (const auto& n : kNames) {
        if (iequals(text, n.label) || iequals(text, n.weight_name)) return n.id;
    }
    throw std::invalid_argument("unknown backbone '" + std::string(text) +
                                "' (expected one of HR18, HR32, HR48, Res18, Res34, Res50, WRes50, Toy)");
}

std::vector<BackboneId> all_backbones() {
    std::vector<BackboneId> ids;
    for (const auto& n : kNames) ids.push_back(n.id);
    return ids;
}

Backbone::Backbone(std::vector<int> taps) : taps_(std::move(taps)) {
    if (taps_.empty()) throw std::invalid_argument("backbone needs at least one hierarchy");
    std::sort(taps_.begin(), taps_.end());
    if (std::adjacent_find(taps_.begin(), taps_.end()) != taps_.end()) {
        throw std::invalid_argument("duplicate hierarchy index");
    }
}

std::vector<LevelInfo> Backbone::tap_info() const {
    std::vector<LevelInfo> out;
    for (int t : taps_) out.push_back(level_info(t));
    return out;
}

nn::StateList Backbone::state() {
    nn::StateList s;
    collect(s);
    return s;
}

std::size_t Backbone::parameter_count() { return nn::count_parameters(state()); }

std::unique_ptr<Backbone> make_backbone(BackboneId id, std::vector<int> taps) {
    const int limit = id == BackboneId::toy ? 3 : 4;
    for (int t : taps) {
        if (t < 0 || t > limit) {
            throw std::invalid_argument("hierarchy " + std::to_string(t) + " out of range [0, " +
                                        std::to_string(limit) + "] for backbone " +
                                        std::string(backbone_label(id)));
        }
    }
    switch (id) {
        case BackboneId::hr18:
        case BackboneId::hr32:
        case BackboneId::hr48: return std::make_unique<HrnetBackbone>(id, std::move(taps));
        case BackboneId::res18:
        case BackboneId::res34:
        case BackboneId::res50:
        case BackboneId::wres50: return std::make_unique<ResNetBackbone>(id, std::move(taps));
        case BackboneId::toy: return std::make_unique<ToyBackbone>(std::move(taps));
    }
    throw std::logic_error("unhandled backbone id");
}

}  // namespace cdo
