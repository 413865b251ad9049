#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdo {

struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t per_item() const { return static_cast<std::size_t>(c) * h * w; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

// Dense NCHW float32 tensor with value semantics.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> values);

    const Shape& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }
    std::vector<float>& storage() { return data_; }
    const std::vector<float>& storage() const { return data_; }

    float* item(int n) { return data_.data() + n * shape_.per_item(); }
    const float* item(int n) const { return data_.data() + n * shape_.per_item(); }

    float& at(int n, int c, int h, int w) {
        return data_[((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }
    float at(int n, int c, int h, int w) const {
        return data_[((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w];
    }

    void fill(float v);
    void zero() { fill(0.0f); }
    // In-place elementwise accumulation; shapes must match.
    Tensor& operator+=(const Tensor& other);

    // Copies item n into a new 1×C×H×W tensor.
    Tensor slice(int n) const;
    static Tensor stack(std::span<const Tensor> items);

private:
    Shape shape_{};
    std::vector<float> data_;
};

// Row-major H×W raster used for masks, discrepancy fields and anomaly maps.
template <typename T>
struct Plane {
    int h = 0;
    int w = 0;
    std::vector<T> data;

    Plane() = default;
    Plane(int height, int width, T fill = T{})
        : h(height), w(width), data(static_cast<std::size_t>(height) * width, fill) {}

    T& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
    const T& operator()(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
    std::size_t size() const { return data.size(); }

    friend bool operator==(const Plane&, const Plane&) = default;
};

using Mask = Plane<std::uint8_t>;
using ScalarField = Plane<float>;

std::size_t count_positive(const Mask& m);

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cdo
