#include "cdo/tensor.hpp"

#include <algorithm>
#include <cstring>

namespace cdo {

std::string to_string(const Shape& s) {
    return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
           std::to_string(s.w);
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.numel()) {
        throw ShapeError("tensor storage size " + std::to_string(data_.size()) +
                         " does not match shape " + to_string(shape_));
    }
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
    if (other.shape_ != shape_) {
        throw ShapeError("cannot add " + to_string(other.shape_) + " into " + to_string(shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor Tensor::slice(int n) const {
    Shape s = shape_;
    s.n = 1;
    Tensor out(s);
    std::memcpy(out.data(), item(n), s.numel() * sizeof(float));
    return out;
}

Tensor Tensor::stack(std::span<const Tensor> items) {
    if (items.empty()) return {};
    Shape s = items.front().shape();
    for (const auto& t : items) {
        if (t.shape().c != s.c || t.shape().h != s.h || t.shape().w != s.w) {
            throw ShapeError("stack: inconsistent item shapes " + to_string(t.shape()) + " vs " +
                             to_string(s));
        }
    }
    int total = 0;
    for (const auto& t : items) total += t.shape().n;
    s.n = total;
    Tensor out(s);
    float* dst = out.data();
    for (const auto& t : items) {
        std::memcpy(dst, t.data(), t.numel() * sizeof(float));
        dst += t.numel();
    }
    return out;
}

std::size_t count_positive(const Mask& m) {
    return static_cast<std::size_t>(
        std::count_if(m.data.begin(), m.data.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace cdo
