#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cdo/tensor.hpp"

namespace cdo {

// H×W×3 interleaved RGB raster with channel values in [0,1].
struct RgbImage {
    int h = 0;
    int w = 0;
    std::vector<float> data;

    RgbImage() = default;
    RgbImage(int height, int width, float fill = 0.0f)
        : h(height), w(width), data(static_cast<std::size_t>(height) * width * 3, fill) {}

    float& operator()(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    float operator()(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * w + x) * 3 + c];
    }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RgbImage read_rgb(const std::filesystem::path& path);
// Nonzero pixels become 1.
Mask read_mask(const std::filesystem::path& path);

void write_rgb(const std::filesystem::path& path, const RgbImage& img);
void write_mask(const std::filesystem::path& path, const Mask& mask);
void write_gray16(const std::filesystem::path& path, const Plane<std::uint16_t>& img);
Plane<std::uint16_t> read_gray16(const std::filesystem::path& path);

// Bilinear resampling with half-pixel centres (align_corners = false, no antialiasing).
ScalarField resize_bilinear(const ScalarField& src, int out_h, int out_w);
RgbImage resize_bilinear(const RgbImage& src, int out_h, int out_w);
// Nearest neighbour with source index floor(dst * in / out).
Mask resize_nearest(const Mask& src, int out_h, int out_w);

// Separable Gaussian blur, kernel radius ceil(4 sigma), reflected borders.
ScalarField gaussian_blur(const ScalarField& src, double sigma);

}  // namespace cdo
