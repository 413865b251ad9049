#include "cdo/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace cdo::nn {
namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using MapConstRM = Eigen::Map<const MatRM>;

void im2col(const float* src, int channels, int h, int w, int k, int stride, int pad, int oh, int ow,
            float* col) {
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < channels; ++c) {
        const float* img = src + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * plane;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    float* out = row + static_cast<std::size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::fill(out, out + ow, 0.0f);
                        continue;
                    }
                    const float* in_row = img + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        out[ox] = (ix >= 0 && ix < w) ? in_row[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im(const float* col, int channels, int h, int w, int k, int stride, int pad, int oh, int ow,
            float* dst) {
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < channels; ++c) {
        float* img = dst + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * plane;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    float* out_row = img + static_cast<std::size_t>(iy) * w;
                    const float* in = row + static_cast<std::size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) out_row[ix] += in[ox];
                    }
                }
            }
        }
    }
}

void require_recorded(bool ok, const char* layer) {
    if (!ok) throw std::logic_error(std::string(layer) + ": backward() without a recorded forward()");
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x, const Pass& pass) {
    Tensor cur = x;
    for (auto& [name, m] : children_) cur = m->forward(cur, pass);
    return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = children_.rbegin(); it != children_.rend(); ++it) g = it->second->backward(g);
    return g;
}

void Sequential::collect(const std::string& prefix, StateList& out) {
    for (auto& [name, m] : children_) m->collect(join_name(prefix, name), out);
}

void Sequential::clear_cache() {
    for (auto& [name, m] : children_) m->clear_cache();
}

// ---------------------------------------------------------------------------

Conv2d::Conv2d(const ConvOptions& opt)
    : opt_(opt),
      weight_(Shape{opt.out_channels, opt.in_channels, opt.kernel, opt.kernel}),
      bias_(opt.bias ? Shape{1, opt.out_channels, 1, 1} : Shape{}) {
    if (opt.in_channels <= 0 || opt.out_channels <= 0 || opt.kernel <= 0 || opt.stride <= 0 || opt.padding < 0) {
        throw std::invalid_argument("Conv2d: invalid options");
    }
}

Shape Conv2d::output_shape(const Shape& in) const {
    const int oh = (in.h + 2 * opt_.padding - opt_.kernel) / opt_.stride + 1;
    const int ow = (in.w + 2 * opt_.padding - opt_.kernel) / opt_.stride + 1;
    return Shape{in.n, opt_.out_channels, oh, ow};
}

void Conv2d::reset_parameters(Rng& rng) {
    const double fan_out = static_cast<double>(opt_.out_channels) * opt_.kernel * opt_.kernel;
    std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_out)));
    for (auto& v : weight_.value.values()) v = dist(rng);
    if (opt_.bias) bias_.value.zero();
}

Tensor Conv2d::forward(const Tensor& x, const Pass& pass) {
    const Shape& in = x.shape();
    if (in.c != opt_.in_channels) {
        throw ShapeError("Conv2d expects " + std::to_string(opt_.in_channels) + " input channels, got " +
                         to_string(in));
    }
    const Shape os = output_shape(in);
    Tensor y(os);
    const int k = opt_.kernel;
    const int rows = opt_.in_channels * k * k;
    const int cols = os.h * os.w;
    const bool direct = k == 1 && opt_.stride == 1 && opt_.padding == 0;

    MapConstRM weight(weight_.value.data(), opt_.out_channels, rows);
    std::vector<float> col(direct ? 0 : static_cast<std::size_t>(rows) * cols);
    for (int n = 0; n < in.n; ++n) {
        const float* colp = x.item(n);
        if (!direct) {
            im2col(x.item(n), in.c, in.h, in.w, k, opt_.stride, opt_.padding, os.h, os.w, col.data());
            colp = col.data();
        }
        MapRM out(y.item(n), opt_.out_channels, cols);
        out.noalias() = weight * MapConstRM(colp, rows, cols);
        if (opt_.bias) {
            for (int o = 0; o < opt_.out_channels; ++o) out.row(o).array() += bias_.value.data()[o];
        }
    }
    if (pass.record) input_ = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    require_recorded(!input_.empty(), "Conv2d");
    const Shape& in = input_.shape();
    const Shape os = output_shape(in);
    if (grad_out.shape() != os) throw ShapeError("Conv2d backward: gradient shape " + to_string(grad_out.shape()));
    const int k = opt_.kernel;
    const int rows = opt_.in_channels * k * k;
    const int cols = os.h * os.w;
    const bool direct = k == 1 && opt_.stride == 1 && opt_.padding == 0;

    Tensor dx(in);
    MapConstRM weight(weight_.value.data(), opt_.out_channels, rows);
    MapRM dweight(weight_.grad.data(), opt_.out_channels, rows);
    std::vector<float> col(direct ? 0 : static_cast<std::size_t>(rows) * cols);
    MatRM dcol;
    for (int n = 0; n < in.n; ++n) {
        const float* colp = input_.item(n);
        if (!direct) {
            im2col(input_.item(n), in.c, in.h, in.w, k, opt_.stride, opt_.padding, os.h, os.w, col.data());
            colp = col.data();
        }
        MapConstRM g(grad_out.item(n), opt_.out_channels, cols);
        dweight.noalias() += g * MapConstRM(colp, rows, cols).transpose();
        if (opt_.bias) {
            for (int o = 0; o < opt_.out_channels; ++o) bias_.grad.data()[o] += g.row(o).sum();
        }
        if (direct) {
            MapRM(dx.item(n), rows, cols).noalias() = weight.transpose() * g;
        } else {
            dcol.noalias() = weight.transpose() * g;
            col2im(dcol.data(), in.c, in.h, in.w, k, opt_.stride, opt_.padding, os.h, os.w, dx.item(n));
        }
    }
    return dx;
}

void Conv2d::collect(const std::string& prefix, StateList& out) {
    out.push_back({join_name(prefix, "weight"), &weight_.value, &weight_.grad, Role::conv_weight});
    if (opt_.bias) out.push_back({join_name(prefix, "bias"), &bias_.value, &bias_.grad, Role::shift});
}

// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int channels, float eps, float momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      weight_(Shape{1, channels, 1, 1}),
      bias_(Shape{1, channels, 1, 1}),
      running_mean_(Shape{1, channels, 1, 1}, 0.0f),
      running_var_(Shape{1, channels, 1, 1}, 1.0f) {
    weight_.value.fill(1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, const Pass& pass) {
    const Shape& s = x.shape();
    if (s.c != channels_) throw ShapeError("BatchNorm2d channel mismatch: " + to_string(s));
    const std::size_t plane = s.plane();
    const double count = static_cast<double>(s.n) * plane;

    std::vector<float> mean(channels_), inv(channels_);
    if (pass.training) {
        for (int c = 0; c < channels_; ++c) {
            double sum = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const float* p = x.item(n) + c * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            const double mu = sum / count;
            double sq = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const float* p = x.item(n) + c * plane;
                for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mu) * (p[i] - mu);
            }
            const double var = sq / count;
            mean[c] = static_cast<float>(mu);
            inv[c] = static_cast<float>(1.0 / std::sqrt(var + eps_));
            const double unbiased = count > 1 ? var * count / (count - 1) : var;
            float& rm = running_mean_.data()[c];
            float& rv = running_var_.data()[c];
            rm = static_cast<float>((1.0 - momentum_) * rm + momentum_ * mu);
            rv = static_cast<float>((1.0 - momentum_) * rv + momentum_ * unbiased);
        }
    } else {
        for (int c = 0; c < channels_; ++c) {
            mean[c] = running_mean_.data()[c];
            inv[c] = 1.0f / std::sqrt(running_var_.data()[c] + eps_);
        }
    }

    Tensor y(s);
    if (pass.record) normalized_ = Tensor(s);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < channels_; ++c) {
            const float* p = x.item(n) + c * plane;
            float* q = y.item(n) + c * plane;
            const float g = weight_.value.data()[c], b = bias_.value.data()[c];
            float* xh = pass.record ? normalized_.item(n) + c * plane : nullptr;
            for (std::size_t i = 0; i < plane; ++i) {
                const float h = (p[i] - mean[c]) * inv[c];
                if (xh) xh[i] = h;
                q[i] = g * h + b;
            }
        }
    }
    if (pass.record) {
        inv_std_ = std::move(inv);
        batch_stats_ = pass.training;
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    require_recorded(!normalized_.empty(), "BatchNorm2d");
    const Shape& s = normalized_.shape();
    const std::size_t plane = s.plane();
    const double count = static_cast<double>(s.n) * plane;
    Tensor dx(s);
    for (int c = 0; c < channels_; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < s.n; ++n) {
            const float* g = grad_out.item(n) + c * plane;
            const float* xh = normalized_.item(n) + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_g += g[i];
                sum_gx += static_cast<double>(g[i]) * xh[i];
            }
        }
        weight_.grad.data()[c] += static_cast<float>(sum_gx);
        bias_.grad.data()[c] += static_cast<float>(sum_g);
        const double gamma = weight_.value.data()[c];
        const double inv = inv_std_[c];
        for (int n = 0; n < s.n; ++n) {
            const float* g = grad_out.item(n) + c * plane;
            const float* xh = normalized_.item(n) + c * plane;
            float* d = dx.item(n) + c * plane;
            if (batch_stats_) {
                const double scale = gamma * inv / count;
                for (std::size_t i = 0; i < plane; ++i)
                    d[i] = static_cast<float>(scale * (count * g[i] - sum_g - xh[i] * sum_gx));
            } else {
                for (std::size_t i = 0; i < plane; ++i) d[i] = static_cast<float>(gamma * inv * g[i]);
            }
        }
    }
    return dx;
}

void BatchNorm2d::collect(const std::string& prefix, StateList& out) {
    out.push_back({join_name(prefix, "weight"), &weight_.value, &weight_.grad, Role::norm_scale});
    out.push_back({join_name(prefix, "bias"), &bias_.value, &bias_.grad, Role::shift});
    out.push_back({join_name(prefix, "running_mean"), &running_mean_, nullptr, Role::running_mean});
    out.push_back({join_name(prefix, "running_var"), &running_var_, nullptr, Role::running_var});
}

// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, const Pass& pass) {
    Tensor y = x;
    for (auto& v : y.values()) v = v > 0.0f ? v : 0.0f;
    if (pass.record) output_ = y;
    return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    require_recorded(!output_.empty(), "ReLU");
    Tensor dx = grad_out;
    const float* y = output_.data();
    float* d = dx.data();
    for (std::size_t i = 0; i < dx.numel(); ++i) {
        if (!(y[i] > 0.0f)) d[i] = 0.0f;
    }
    return dx;
}

// ---------------------------------------------------------------------------

Tensor MaxPool2d::forward(const Tensor& x, const Pass& pass) {
    const Shape& s = x.shape();
    const int oh = (s.h + 2 * padding_ - kernel_) / stride_ + 1;
    const int ow = (s.w + 2 * padding_ - kernel_) / stride_ + 1;
    Tensor y(Shape{s.n, s.c, oh, ow});
    if (pass.record) {
        argmax_.assign(y.numel(), 0);
        in_shape_ = s;
    }
    std::size_t o = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
            const float* p = x.data() + base;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox, ++o) {
                    float best = -std::numeric_limits<float>::infinity();
                    std::size_t arg = 0;
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int iy = oy * stride_ - padding_ + ky;
                        if (iy < 0 || iy >= s.h) continue;
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const int ix = ox * stride_ - padding_ + kx;
                            if (ix < 0 || ix >= s.w) continue;
                            const std::size_t idx = static_cast<std::size_t>(iy) * s.w + ix;
                            if (p[idx] > best) {
                                best = p[idx];
                                arg = idx;
                            }
                        }
                    }
                    y.data()[o] = best;
                    if (pass.record) argmax_[o] = static_cast<std::uint32_t>(base + arg);
                }
            }
        }
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
    require_recorded(!argmax_.empty(), "MaxPool2d");
    Tensor dx(in_shape_);
    for (std::size_t i = 0; i < grad_out.numel(); ++i) dx.data()[argmax_[i]] += grad_out.data()[i];
    return dx;
}

// ---------------------------------------------------------------------------

Tensor UpsampleNearest::forward(const Tensor& x, const Pass&) {
    const Shape& s = x.shape();
    Tensor y(Shape{s.n, s.c, s.h * factor_, s.w * factor_});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int oy = 0; oy < s.h * factor_; ++oy)
                for (int ox = 0; ox < s.w * factor_; ++ox)
                    y.at(n, c, oy, ox) = x.at(n, c, oy / factor_, ox / factor_);
    return y;
}

Tensor UpsampleNearest::backward(const Tensor& grad_out) {
    const Shape& g = grad_out.shape();
    Tensor dx(Shape{g.n, g.c, g.h / factor_, g.w / factor_});
    for (int n = 0; n < g.n; ++n)
        for (int c = 0; c < g.c; ++c)
            for (int oy = 0; oy < g.h; ++oy)
                for (int ox = 0; ox < g.w; ++ox) dx.at(n, c, oy / factor_, ox / factor_) += grad_out.at(n, c, oy, ox);
    return dx;
}

// ---------------------------------------------------------------------------

ModulePtr conv(int in, int out, int kernel, int stride, int padding, bool bias) {
    return std::make_unique<Conv2d>(ConvOptions{in, out, kernel, stride, padding, bias});
}
ModulePtr conv3x3(int in, int out, int stride) { return conv(in, out, 3, stride, 1); }
ModulePtr conv1x1(int in, int out, int stride) { return conv(in, out, 1, stride, 0); }
ModulePtr batch_norm(int channels) { return std::make_unique<BatchNorm2d>(channels); }
ModulePtr relu() { return std::make_unique<ReLU>(); }

void reset_state(StateList& state, Rng& rng) {
    for (auto& t : state) {
        switch (t.role) {
            case Role::conv_weight: {
                const Shape& s = t.value->shape();
                const double fan_out = static_cast<double>(s.n) * s.h * s.w;
                std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_out)));
                for (auto& v : t.value->values()) v = dist(rng);
                break;
            }
            case Role::norm_scale: t.value->fill(1.0f); break;
            case Role::shift: t.value->fill(0.0f); break;
            case Role::running_mean: t.value->fill(0.0f); break;
            case Role::running_var: t.value->fill(1.0f); break;
        }
    }
}

std::size_t count_parameters(const StateList& state) {
    std::size_t total = 0;
    for (const auto& t : state) {
        if (t.trainable()) total += t.value->numel();
    }
    return total;
}

}  // namespace cdo::nn
