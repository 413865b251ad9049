#include "cdo/nn/blocks.hpp"

namespace cdo::nn {
namespace {

Sequential projection(int in, int out, int stride) {
    Sequential s;
    s.add("0", conv1x1(in, out, stride));
    s.add("1", batch_norm(out));
    return s;
}

}  // namespace

BasicBlock::BasicBlock(int inplanes, int planes, int stride, bool downsample)
    : conv1_({inplanes, planes, 3, stride, 1, false}),
      conv2_({planes, planes, 3, 1, 1, false}),
      bn1_(planes),
      bn2_(planes) {
    if (downsample) downsample_ = projection(inplanes, planes, stride);
}

Tensor BasicBlock::forward(const Tensor& x, const Pass& pass) {
    Tensor y = act1_.forward(bn1_.forward(conv1_.forward(x, pass), pass), pass);
    y = bn2_.forward(conv2_.forward(y, pass), pass);
    y += downsample_.empty() ? x : downsample_.forward(x, pass);
    return act_out_.forward(y, pass);
}

Tensor BasicBlock::backward(const Tensor& grad_out) {
    const Tensor g = act_out_.backward(grad_out);
    Tensor dx = conv1_.backward(bn1_.backward(act1_.backward(conv2_.backward(bn2_.backward(g)))));
    dx += downsample_.empty() ? g : downsample_.backward(g);
    return dx;
}

void BasicBlock::collect(const std::string& prefix, StateList& out) {
    conv1_.collect(join_name(prefix, "conv1"), out);
    bn1_.collect(join_name(prefix, "bn1"), out);
    conv2_.collect(join_name(prefix, "conv2"), out);
    bn2_.collect(join_name(prefix, "bn2"), out);
    downsample_.collect(join_name(prefix, "downsample"), out);
}

void BasicBlock::clear_cache() {
    conv1_.clear_cache();
    conv2_.clear_cache();
    bn1_.clear_cache();
    bn2_.clear_cache();
    act1_.clear_cache();
    act_out_.clear_cache();
    downsample_.clear_cache();
}

Bottleneck::Bottleneck(int inplanes, int planes, int stride, bool downsample, int base_width)
    : conv1_({inplanes, planes * base_width / 64, 1, 1, 0, false}),
      conv2_({planes * base_width / 64, planes * base_width / 64, 3, stride, 1, false}),
      conv3_({planes * base_width / 64, planes * expansion, 1, 1, 0, false}),
      bn1_(planes * base_width / 64),
      bn2_(planes * base_width / 64),
      bn3_(planes * expansion) {
    if (downsample) downsample_ = projection(inplanes, planes * expansion, stride);
}

Tensor Bottleneck::forward(const Tensor& x, const Pass& pass) {
    Tensor y = act1_.forward(bn1_.forward(conv1_.forward(x, pass), pass), pass);
    y = act2_.forward(bn2_.forward(conv2_.forward(y, pass), pass), pass);
    y = bn3_.forward(conv3_.forward(y, pass), pass);
    y += downsample_.empty() ? x : downsample_.forward(x, pass);
    return act_out_.forward(y, pass);
}

Tensor Bottleneck::backward(const Tensor& grad_out) {
    const Tensor g = act_out_.backward(grad_out);
    Tensor d = act2_.backward(conv3_.backward(bn3_.backward(g)));
    Tensor dx = conv1_.backward(bn1_.backward(act1_.backward(conv2_.backward(bn2_.backward(d)))));
    dx += downsample_.empty() ? g : downsample_.backward(g);
    return dx;
}

void Bottleneck::collect(const std::string& prefix, StateList& out) {
    conv1_.collect(join_name(prefix, "conv1"), out);
    bn1_.collect(join_name(prefix, "bn1"), out);
    conv2_.collect(join_name(prefix, "conv2"), out);
    bn2_.collect(join_name(prefix, "bn2"), out);
    conv3_.collect(join_name(prefix, "conv3"), out);
    bn3_.collect(join_name(prefix, "bn3"), out);
    downsample_.collect(join_name(prefix, "downsample"), out);
}

void Bottleneck::clear_cache() {
    for (Conv2d* c : {&conv1_, &conv2_, &conv3_}) c->clear_cache();
    for (BatchNorm2d* b : {&bn1_, &bn2_, &bn3_}) b->clear_cache();
    for (ReLU* r : {&act1_, &act2_, &act_out_}) r->clear_cache();
    downsample_.clear_cache();
}

std::unique_ptr<Sequential> make_layer(BlockType type, int& inplanes, int planes, int blocks, int stride,
                                       int base_width) {
    auto layer = std::make_unique<Sequential>();
    const int out = planes * block_expansion(type);
    const bool project = stride != 1 || inplanes != out;
    for (int b = 0; b < blocks; ++b) {
        const int s = b == 0 ? stride : 1;
        const bool ds = b == 0 && project;
        if (type == BlockType::basic) {
            layer->add(std::make_unique<BasicBlock>(inplanes, planes, s, ds));
        } else {
            layer->add(std::make_unique<Bottleneck>(inplanes, planes, s, ds, base_width));
        }
        inplanes = out;
    }
    return layer;
}

}  // namespace cdo::nn
