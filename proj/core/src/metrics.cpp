#include "cdo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cdo {
namespace {

void check_pair(const ScoredImage& im, std::size_t index) {
    if (im.scores.h != im.mask.h || im.scores.w != im.mask.w) {
        throw MetricError("scored image " + std::to_string(index) + ": map is " + std::to_string(im.scores.h) + "x" +
                          std::to_string(im.scores.w) + " but mask is " + std::to_string(im.mask.h) + "x" +
                          std::to_string(im.mask.w));
    }
}

// Region id per pixel (-1 for negatives) and per-region pixel counts, over the whole set.
struct PooledPixels {
    std::vector<float> scores;
    std::vector<int> region;
    std::vector<double> region_size;
    std::size_t negatives = 0;
};

PooledPixels pool(const ScoredSet& set) {
    PooledPixels p;
    for (std::size_t k = 0; k < set.size(); ++k) {
        const auto& im = set[k];
        check_pair(im, k);
        const Components comp = label_components(im.mask);
        const int base = static_cast<int>(p.region_size.size());
        p.region_size.resize(p.region_size.size() + comp.count, 0.0);
        for (std::size_t i = 0; i < im.scores.size(); ++i) {
            p.scores.push_back(im.scores.data[i]);
            const int l = comp.labels.data[i];
            if (l == 0) {
                p.region.push_back(-1);
                ++p.negatives;
            } else {
                p.region.push_back(base + l - 1);
                p.region_size[base + l - 1] += 1.0;
            }
        }
    }
    return p;
}

struct CurvePoint {
    double fpr;
    double pro;
};

// Trapezoid area of a curve sorted by fpr, cut at `limit` by linear interpolation.
double area_until(const std::vector<CurvePoint>& curve, double limit) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const auto& a = curve[i - 1];
        const auto& b = curve[i];
        if (a.fpr >= limit) break;
        if (b.fpr <= limit) {
            area += (b.fpr - a.fpr) * (a.pro + b.pro) * 0.5;
        } else {
            const double t = (limit - a.fpr) / (b.fpr - a.fpr);
            const double pro_at = a.pro + t * (b.pro - a.pro);
            area += (limit - a.fpr) * (a.pro + pro_at) * 0.5;
            break;
        }
    }
    return area;
}

}  // namespace

Components label_components(const Mask& mask) {
    Components c{Plane<int>(mask.h, mask.w, 0), 0};
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) {
            if (!mask(y, x) || c.labels(y, x)) continue;
            const int id = ++c.count;
            c.labels(y, x) = id;
            stack.emplace_back(y, x);
            while (!stack.empty()) {
                const auto [cy, cx] = stack.back();
                stack.pop_back();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || nx < 0 || ny >= mask.h || nx >= mask.w) continue;
                        if (!mask(ny, nx) || c.labels(ny, nx)) continue;
                        c.labels(ny, nx) = id;
                        stack.emplace_back(ny, nx);
                    }
                }
            }
        }
    }
    return c;
}

double auroc_pixel(const ScoredSet& set) {
    std::vector<std::pair<float, std::uint8_t>> px;
    for (std::size_t k = 0; k < set.size(); ++k) {
        check_pair(set[k], k);
        for (std::size_t i = 0; i < set[k].scores.size(); ++i)
            px.emplace_back(set[k].scores.data[i], set[k].mask.data[i] ? 1 : 0);
    }
    const double pos = static_cast<double>(std::count_if(px.begin(), px.end(), [](auto& p) { return p.second; }));
    const double neg = static_cast<double>(px.size()) - pos;
    if (pos == 0.0 || neg == 0.0) throw MetricError("auroc needs both positive and negative pixels");
    std::sort(px.begin(), px.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    double tp = 0.0, fp = 0.0, area = 0.0;
    for (std::size_t i = 0; i < px.size();) {
        const float s = px[i].first;
        double dtp = 0.0, dfp = 0.0;
        for (; i < px.size() && px[i].first == s; ++i) (px[i].second ? dtp : dfp) += 1.0;
        area += dfp * (tp + 0.5 * dtp);
        tp += dtp;
        fp += dfp;
    }
    return area / (pos * neg);
}

double aupro(const ScoredSet& set, double fpr_limit, AuproMethod method) {
    if (!(fpr_limit > 0.0 && fpr_limit <= 1.0))
        throw MetricError("fpr_limit must lie in (0, 1], got " + std::to_string(fpr_limit));
    PooledPixels p = pool(set);
    if (p.region_size.empty()) throw MetricError("aupro needs at least one ground-truth region");
    if (p.negatives == 0) throw MetricError("aupro needs at least one negative pixel");
    const double n_regions = static_cast<double>(p.region_size.size());
    const double negatives = static_cast<double>(p.negatives);

    std::vector<std::size_t> order(p.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p.scores[a] > p.scores[b]; });

    if (method == AuproMethod::automatic)
        method = p.scores.size() > kAuproExactLimit ? AuproMethod::grid : AuproMethod::exact;

    std::vector<CurvePoint> curve{{0.0, 0.0}};
    double fp = 0.0, pro_sum = 0.0;
    auto admit = [&](std::size_t idx) {
        const int r = p.region[idx];
        if (r < 0) fp += 1.0;
        else pro_sum += 1.0 / p.region_size[r];
    };

    std::size_t i = 0;
    if (method == AuproMethod::exact) {
        while (i < order.size()) {
            const float s = p.scores[order[i]];
            for (; i < order.size() && p.scores[order[i]] == s; ++i) admit(order[i]);
            curve.push_back({fp / negatives, pro_sum / n_regions});
        }
    } else {
        const double hi = p.scores[order.front()];
        const double lo = p.scores[order.back()];
        for (int k = 0; k < kAuproGridPoints; ++k) {
            // Thresholds descend from hi to lo; the last one admits every pixel.
            const double t = k + 1 == kAuproGridPoints ? lo : hi - (hi - lo) * k / (kAuproGridPoints - 1);
            for (; i < order.size() && p.scores[order[i]] >= t; ++i) admit(order[i]);
            curve.push_back({fp / negatives, pro_sum / n_regions});
        }
    }
    return area_until(curve, fpr_limit) / fpr_limit;
}

DDStats dd_stats(const std::vector<double>& d_normal, const std::vector<double>& d_abnormal, int n_bins) {
    if (d_normal.empty() || d_abnormal.empty()) throw MetricError("dd_stats needs two non-empty sets");
    if (n_bins < 1) throw MetricError("dd_stats needs at least one bin");
    DDStats s;
    s.mu_n = std::accumulate(d_normal.begin(), d_normal.end(), 0.0) / static_cast<double>(d_normal.size());
    s.mu_a = std::accumulate(d_abnormal.begin(), d_abnormal.end(), 0.0) / static_cast<double>(d_abnormal.size());
    s.margin = std::abs(s.mu_a - s.mu_n);

    const auto [n_lo, n_hi] = std::minmax_element(d_normal.begin(), d_normal.end());
    const auto [a_lo, a_hi] = std::minmax_element(d_abnormal.begin(), d_abnormal.end());
    s.lo = std::min(*n_lo, *a_lo);
    s.hi = std::max(*n_hi, *a_hi);
    if (!(s.hi > s.lo)) n_bins = 1;
    s.bin_width = s.hi > s.lo ? (s.hi - s.lo) / n_bins : 1.0;

    auto histogram = [&](const std::vector<double>& v) {
        std::vector<double> h(static_cast<std::size_t>(n_bins), 0.0);
        for (double x : v) {
            int b = static_cast<int>((x - s.lo) / s.bin_width);
            h[static_cast<std::size_t>(std::clamp(b, 0, n_bins - 1))] += 1.0;
        }
        for (double& c : h) c /= static_cast<double>(v.size()) * s.bin_width;
        return h;
    };
    s.hist_n = histogram(d_normal);
    s.hist_a = histogram(d_abnormal);
    double ov = 0.0;
    for (int b = 0; b < n_bins; ++b) ov += std::min(s.hist_n[b], s.hist_a[b]) * s.bin_width;
    s.overlap = std::clamp(ov, 0.0, 1.0);
    return s;
}

}  // namespace cdo
