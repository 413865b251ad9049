#pragma once

#include <opencv2/core.hpp>
#include <vector>

#include "cdo/image.hpp"
#include "cdo/metrics.hpp"
#include "cdo/trainer.hpp"

namespace cdo::cli {

cv::Mat to_bgr8(const RgbImage& img);

// Normal (green) and abnormal (red) densities over the shared bins, with the two means marked.
cv::Mat dd_histogram_plot(const DDStats& dd, int width = 720, int height = 420);

// Per-epoch mu_n and mu_s. An empty log gives a blank canvas with a note.
cv::Mat curves_plot(const std::vector<EpochLog>& logs, int width = 720, int height = 420);

// Input | ground truth | anomaly map (JET over [lo, hi]) side by side.
cv::Mat triptych(const RgbImage& input, const Mask& truth, const ScalarField& map, float lo, float hi);

}  // namespace cdo::cli
