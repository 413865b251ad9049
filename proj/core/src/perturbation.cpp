#include "cdo/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdo {

void PerturbationConfig::validate() const {
    if (min_squares < 0 || min_squares > max_squares) {
        throw std::invalid_argument("perturbation: need 0 <= min_squares <= max_squares");
    }
    if (!(min_side_fraction > 0.0) || min_side_fraction > max_side_fraction || max_side_fraction > 1.0) {
        throw std::invalid_argument("perturbation: need 0 < min_side_fraction <= max_side_fraction <= 1");
    }
    if (!(fill_std >= 0.0)) throw std::invalid_argument("perturbation: fill_std must be >= 0");
}

std::vector<Square> sample_squares(int height, int width, const PerturbationConfig& cfg, Rng& rng) {
    std::uniform_int_distribution<int> count(cfg.min_squares, cfg.max_squares);
    std::uniform_real_distribution<double> side_frac(cfg.min_side_fraction, cfg.max_side_fraction);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int k = count(rng);
    const int extent = std::min(height, width);
    std::vector<Square> squares;
    squares.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const int side = std::max(1, static_cast<int>(std::lround(side_frac(rng) * extent)));
        const int cy = static_cast<int>(unit(rng) * height);
        const int cx = static_cast<int>(unit(rng) * width);
        squares.push_back({cy - side / 2, cx - side / 2, side});
    }
    return squares;
}

PerturbationOutcome apply_squares(const Tensor& image, const std::vector<Square>& squares, double fill_mean,
                                  double fill_std, Rng& rng) {
    const Shape& s = image.shape();
    if (s.n != 1) throw ShapeError("perturb expects a single 1xCxHxW image, got " + to_string(s));
    PerturbationOutcome out{image, Mask(s.h, s.w, 0)};
    std::normal_distribution<float> fill(static_cast<float>(fill_mean), static_cast<float>(fill_std));
    for (const auto& sq : squares) {
        const int y0 = std::max(sq.top, 0), y1 = std::min(sq.top + sq.side, s.h);
        const int x0 = std::max(sq.left, 0), x1 = std::min(sq.left + sq.side, s.w);
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                out.mask(y, x) = 1;
                for (int c = 0; c < s.c; ++c) out.image.at(0, c, y, x) = fill(rng);
            }
        }
    }
    return out;
}

PerturbationOutcome perturb(const Tensor& image, const PerturbationConfig& cfg, Rng& rng) {
    const auto squares = sample_squares(image.shape().h, image.shape().w, cfg, rng);
    return apply_squares(image, squares, cfg.fill_mean, cfg.fill_std, rng);
}

Mask partition_pixels(const Mask& mask, int feature_h, int feature_w) {
    if (feature_h <= 0 || feature_w <= 0 || feature_h > mask.h || feature_w > mask.w) {
        throw ShapeError("partition_pixels: feature grid " + std::to_string(feature_h) + "x" +
                         std::to_string(feature_w) + " incompatible with mask " + std::to_string(mask.h) + "x" +
                         std::to_string(mask.w));
    }
    Mask cells(feature_h, feature_w, 0);
    for (int i = 0; i < feature_h; ++i) {
        const int y0 = static_cast<int>(static_cast<long long>(i) * mask.h / feature_h);
        const int y1 = static_cast<int>((static_cast<long long>(i + 1) * mask.h + feature_h - 1) / feature_h);
        for (int j = 0; j < feature_w; ++j) {
            const int x0 = static_cast<int>(static_cast<long long>(j) * mask.w / feature_w);
            const int x1 = static_cast<int>((static_cast<long long>(j + 1) * mask.w + feature_w - 1) / feature_w);
            bool hit = false;
            for (int y = y0; y < y1 && !hit; ++y)
                for (int x = x0; x < x1 && !hit; ++x) hit = mask(y, x) != 0;
            cells(i, j) = hit ? 1 : 0;
        }
    }
    return cells;
}

}  // namespace cdo
