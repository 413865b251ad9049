#pragma once

#include <cstdint>
#include <vector>

#include "cdo/rng.hpp"
#include "cdo/tensor.hpp"

namespace cdo {

struct PerturbationConfig {
    int min_squares = 1;
    int max_squares = 4;
    double min_side_fraction = 1.0 / 16.0;  // square side as a fraction of the image side
    double max_side_fraction = 1.0 / 4.0;
    double fill_mean = 0.0;  // in normalised-image space
    double fill_std = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Axis-aligned square; may extend past the image border (clipped when applied).
struct Square {
    int top = 0;
    int left = 0;
    int side = 0;
};

struct PerturbationOutcome {
    Tensor image;  // 1×3×R×R
    Mask mask;     // R×R, 1 = synthetically perturbed
};

// Samples k squares (k uniform in [min_squares, max_squares]) with uniformly placed centres and
// sides uniform in the configured fraction range, then fills them with i.i.d. Gaussian values
// per pixel and channel.
PerturbationOutcome perturb(const Tensor& image, const PerturbationConfig& cfg, Rng& rng);

std::vector<Square> sample_squares(int height, int width, const PerturbationConfig& cfg, Rng& rng);

// Fills the given squares; everything outside them is copied bit-exactly.
PerturbationOutcome apply_squares(const Tensor& image, const std::vector<Square>& squares, double fill_mean,
                                  double fill_std, Rng& rng);

// Max-pooling downsample: a feature cell is synthetic-abnormal iff any input pixel it covers is
// perturbed. Cell (i, j) covers rows [floor(i R / Hf), ceil((i + 1) R / Hf)).
Mask partition_pixels(const Mask& mask, int feature_h, int feature_w);

}  // namespace cdo
