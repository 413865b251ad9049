#pragma once

#include <vector>

#include "cdo/tensor.hpp"

namespace cdo {

struct ScoredImage {
    ScalarField scores;
    Mask mask;  // 1 = anomalous ground truth; all-zero for normal images
};
using ScoredSet = std::vector<ScoredImage>;

class MetricError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Pixel AU-ROC over every pixel of the set. Tied scores change class together, so a tie
// contributes half a concordant pair. Throws MetricError when a class is missing.
double auroc_pixel(const ScoredSet& set);

enum class AuproMethod {
    automatic,  // exact up to kAuproExactLimit pixels, grid above
    exact,      // every distinct score is a threshold
    grid,       // kAuproGridPoints thresholds evenly spaced over [min, max]
};
inline constexpr std::size_t kAuproExactLimit = std::size_t{1} << 24;
inline constexpr int kAuproGridPoints = 1000;

// Area under the per-region-overlap curve for FPR in [0, fpr_limit], divided by fpr_limit.
// Regions are 8-connected components of each mask; FPR is over the pooled negative pixels.
// The curve starts at (0, 0) and is linearly interpolated at fpr_limit.
double aupro(const ScoredSet& set, double fpr_limit = 0.3, AuproMethod method = AuproMethod::automatic);

// 8-connected component labels (0 = background, 1..count) and the component count.
struct Components {
    Plane<int> labels;
    int count = 0;
};
Components label_components(const Mask& mask);

struct DDStats {
    double mu_n = 0.0;
    double mu_a = 0.0;
    double margin = 0.0;   // |mu_a - mu_n|
    double overlap = 0.0;  // histogram intersection mass in [0, 1]
    double lo = 0.0;       // shared histogram range
    double hi = 0.0;
    double bin_width = 0.0;
    std::vector<double> hist_n;  // densities; sum * bin_width == 1
    std::vector<double> hist_a;
};

// Shared-range equal-width histograms. A zero-width range collapses to a single unit bin.
DDStats dd_stats(const std::vector<double>& d_normal, const std::vector<double>& d_abnormal, int n_bins = 100);

}  // namespace cdo
