#include "cdo/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace cdo {
namespace {

struct LinearTap {
    int i0;
    int i1;
    float frac;
};

std::vector<LinearTap> linear_taps(int in, int out) {
    std::vector<LinearTap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        int i0 = static_cast<int>(std::floor(src));
        if (i0 > in - 1) i0 = in - 1;
        const int i1 = std::min(i0 + 1, in - 1);
        taps[o] = {i0, i1, static_cast<float>(src - i0)};
    }
    return taps;
}

float to_unit(const cv::Mat& m, int y, int x, int c) {
    if (m.depth() == CV_16U) return m.ptr<std::uint16_t>(y)[x * m.channels() + c] / 65535.0f;
    return m.ptr<std::uint8_t>(y)[x * m.channels() + c] / 255.0f;
}

}  // namespace

RgbImage read_rgb(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
    if (m.empty()) throw ImageIoError("unreadable image: " + path.string());
    RgbImage img(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            // OpenCV stores BGR.
            img(y, x, 0) = to_unit(m, y, x, 2);
            img(y, x, 1) = to_unit(m, y, x, 1);
            img(y, x, 2) = to_unit(m, y, x, 0);
        }
    }
    return img;
}

Mask read_mask(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
    if (m.empty()) throw ImageIoError("unreadable mask: " + path.string());
    Mask mask(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            const bool on = m.depth() == CV_16U ? m.ptr<std::uint16_t>(y)[x] > 0 : m.ptr<std::uint8_t>(y)[x] > 0;
            mask(y, x) = on ? 1 : 0;
        }
    }
    return mask;
}

void write_rgb(const std::filesystem::path& path, const RgbImage& img) {
    cv::Mat m(img.h, img.w, CV_8UC3);
    for (int y = 0; y < img.h; ++y) {
        auto* row = m.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(img(y, x, c), 0.0f, 1.0f);
                row[x * 3 + (2 - c)] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
        }
    }
    if (!cv::imwrite(path.string(), m)) throw ImageIoError("cannot write image: " + path.string());
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
    cv::Mat m(mask.h, mask.w, CV_8UC1);
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) m.at<std::uint8_t>(y, x) = mask(y, x) ? 255 : 0;
    }
    if (!cv::imwrite(path.string(), m)) throw ImageIoError("cannot write mask: " + path.string());
}

void write_gray16(const std::filesystem::path& path, const Plane<std::uint16_t>& img) {
    cv::Mat m(img.h, img.w, CV_16UC1);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) m.at<std::uint16_t>(y, x) = img(y, x);
    }
    if (!cv::imwrite(path.string(), m)) throw ImageIoError("cannot write image: " + path.string());
}

Plane<std::uint16_t> read_gray16(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty() || m.channels() != 1) throw ImageIoError("unreadable 16-bit image: " + path.string());
    Plane<std::uint16_t> out(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            out(y, x) = m.depth() == CV_16U ? m.at<std::uint16_t>(y, x) : m.at<std::uint8_t>(y, x);
        }
    }
    return out;
}

ScalarField resize_bilinear(const ScalarField& src, int out_h, int out_w) {
    if (src.h == out_h && src.w == out_w) return src;
    const auto ty = linear_taps(src.h, out_h);
    const auto tx = linear_taps(src.w, out_w);
    ScalarField out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const auto& a = ty[y];
        for (int x = 0; x < out_w; ++x) {
            const auto& b = tx[x];
            const float top = src(a.i0, b.i0) + (src(a.i0, b.i1) - src(a.i0, b.i0)) * b.frac;
            const float bot = src(a.i1, b.i0) + (src(a.i1, b.i1) - src(a.i1, b.i0)) * b.frac;
            out(y, x) = top + (bot - top) * a.frac;
        }
    }
    return out;
}

RgbImage resize_bilinear(const RgbImage& src, int out_h, int out_w) {
    if (src.h == out_h && src.w == out_w) return src;
    RgbImage out(out_h, out_w);
    for (int c = 0; c < 3; ++c) {
        ScalarField plane(src.h, src.w);
        for (int y = 0; y < src.h; ++y)
            for (int x = 0; x < src.w; ++x) plane(y, x) = src(y, x, c);
        const ScalarField r = resize_bilinear(plane, out_h, out_w);
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) out(y, x, c) = r(y, x);
    }
    return out;
}

Mask resize_nearest(const Mask& src, int out_h, int out_w) {
    if (src.h == out_h && src.w == out_w) return src;
    Mask out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::min(static_cast<int>(static_cast<long long>(y) * src.h / out_h), src.h - 1);
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::min(static_cast<int>(static_cast<long long>(x) * src.w / out_w), src.w - 1);
            out(y, x) = src(sy, sx);
        }
    }
    return out;
}

ScalarField gaussian_blur(const ScalarField& src, double sigma) {
    if (sigma <= 0.0 || src.size() == 0) return src;
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        total += kernel[i + radius];
    }
    for (auto& k : kernel) k /= total;

    auto reflect = [](int i, int n) {
        if (n == 1) return 0;
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - i - 1;
        }
        return i;
    };

    ScalarField tmp(src.h, src.w);
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * src(y, reflect(x + i, src.w));
            tmp(y, x) = static_cast<float>(acc);
        }
    }
    ScalarField out(src.h, src.w);
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(reflect(y + i, src.h), x);
            out(y, x) = static_cast<float>(acc);
        }
    }
    return out;
}

}  // namespace cdo
