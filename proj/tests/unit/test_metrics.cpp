#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <opencv2/imgproc.hpp>
#include <random>
#include <set>

#include "cdo/metrics.hpp"

using namespace cdo;

namespace {

// Pairwise definition: P(score_pos > score_neg) + 0.5 P(tie).
double auroc_pairwise(const ScoredSet& set) {
    std::vector<float> pos, neg;
    for (const auto& im : set)
        for (std::size_t i = 0; i < im.scores.size(); ++i) (im.mask.data[i] ? pos : neg).push_back(im.scores.data[i]);
    double wins = 0.0;
    for (float p : pos)
        for (float n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Every distinct score as a threshold, regions from OpenCV's 8-connected labelling.
double aupro_bruteforce(const ScoredSet& set, double limit) {
    struct Region {
        std::size_t image;
        std::vector<std::size_t> pixels;
    };
    std::vector<Region> regions;
    std::size_t negatives = 0;
    std::set<float, std::greater<>> thresholds;
    for (std::size_t k = 0; k < set.size(); ++k) {
        const auto& im = set[k];
        cv::Mat m(im.mask.h, im.mask.w, CV_8U, const_cast<std::uint8_t*>(im.mask.data.data())), labels;
        const int n = cv::connectedComponents(m, labels, 8, CV_32S);
        std::vector<Region> local(static_cast<std::size_t>(n > 0 ? n - 1 : 0), Region{k, {}});
        for (int y = 0; y < im.mask.h; ++y)
            for (int x = 0; x < im.mask.w; ++x) {
                const int l = labels.at<int>(y, x);
                if (l > 0) local[l - 1].pixels.push_back(static_cast<std::size_t>(y * im.mask.w + x));
                else ++negatives;
            }
        regions.insert(regions.end(), local.begin(), local.end());
        thresholds.insert(im.scores.data.begin(), im.scores.data.end());
    }

    std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
    for (float t : thresholds) {
        std::size_t fp = 0;
        for (const auto& im : set)
            for (std::size_t i = 0; i < im.scores.size(); ++i) fp += (!im.mask.data[i] && im.scores.data[i] >= t);
        double pro = 0.0;
        for (const auto& r : regions) {
            std::size_t hit = 0;
            for (std::size_t i : r.pixels) hit += set[r.image].scores.data[i] >= t;
            pro += static_cast<double>(hit) / static_cast<double>(r.pixels.size());
        }
        curve.emplace_back(static_cast<double>(fp) / static_cast<double>(negatives), pro / regions.size());
    }
    // Integrate min(fpr, limit) piecewise; a vertical jump adds no area.
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const auto [x0, y0] = curve[i - 1];
        const auto [x1, y1] = curve[i];
        if (x0 >= limit || x1 == x0) continue;
        const double xe = std::min(x1, limit);
        const double ye = y0 + (y1 - y0) * (xe - x0) / (x1 - x0);
        area += (xe - x0) * (y0 + ye) / 2.0;
    }
    return area / limit;
}

// One 8×8 image with 1-3 rectangular regions; scores are loosely correlated with the mask and
// quantised so ties occur.
ScoredImage random_instance(std::mt19937_64& rng) {
    ScoredImage im{ScalarField(8, 8), Mask(8, 8, 0)};
    std::uniform_int_distribution<int> n_regions(1, 3), pos(0, 6), side(1, 3);
    const int k = n_regions(rng);
    for (int r = 0; r < k; ++r) {
        const int y = pos(rng), x = pos(rng), h = side(rng), w = side(rng);
        for (int yy = y; yy < std::min(8, y + h); ++yy)
            for (int xx = x; xx < std::min(8, x + w); ++xx) im.mask(yy, xx) = 1;
    }
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < im.scores.size(); ++i)
        im.scores.data[i] = static_cast<float>(std::round((noise(rng) + 1.2 * im.mask.data[i]) * 8.0) / 8.0);
    return im;
}

}  // namespace

TEST(Auroc, PerfectAndInverted) {
    ScoredImage im{ScalarField(1, 4), Mask(1, 4, 0)};
    im.scores.data = {0.1f, 0.2f, 0.8f, 0.9f};
    im.mask.data = {0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(auroc_pixel({im}), 1.0);
    im.mask.data = {1, 1, 0, 0};
    EXPECT_DOUBLE_EQ(auroc_pixel({im}), 0.0);
    im.scores.data = {0.5f, 0.5f, 0.5f, 0.5f};
    EXPECT_DOUBLE_EQ(auroc_pixel({im}), 0.5);
}

TEST(Auroc, MatchesPairwiseOracle) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 100; ++t) {
        ScoredSet set{random_instance(rng), random_instance(rng)};
        EXPECT_NEAR(auroc_pixel(set), auroc_pairwise(set), 1e-12);
    }
}

TEST(Auroc, MissingClassThrows) {
    ScoredImage im{ScalarField(2, 2, 1.0f), Mask(2, 2, 0)};
    EXPECT_THROW(auroc_pixel({im}), MetricError);
    ScoredImage bad{ScalarField(2, 3), Mask(2, 2, 0)};
    EXPECT_THROW(auroc_pixel({bad}), MetricError);
}

TEST(Aupro, MatchesExhaustiveOracle) {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 200; ++t) {
        ScoredSet set{random_instance(rng)};
        for (double limit : {0.3, 1.0}) EXPECT_NEAR(aupro(set, limit), aupro_bruteforce(set, limit), 1e-9) << t;
    }
}

TEST(Aupro, PerfectSeparationIsOne) {
    std::mt19937_64 rng(23);
    ScoredImage im = random_instance(rng);
    for (std::size_t i = 0; i < im.scores.size(); ++i) im.scores.data[i] = im.mask.data[i] ? 2.0f : 0.0f;
    EXPECT_NEAR(aupro({im}, 0.3), 1.0, 1e-12);
}

TEST(Aupro, RegionsAreWeightedEquallyRegardlessOfSize) {
    // Region A (one pixel) is detected, region B (eight pixels) is not: PRO = 0.5 at every
    // threshold that admits A but no negatives.
    ScoredImage im{ScalarField(4, 8, 0.0f), Mask(4, 8, 0)};
    im.mask(0, 0) = 1;
    im.scores(0, 0) = 5.0f;
    for (int x = 4; x < 8; ++x) im.mask(2, x) = im.mask(3, x) = 1;
    EXPECT_NEAR(aupro({im}, 1.0), aupro_bruteforce({im}, 1.0), 1e-12);
    EXPECT_GT(aupro({im}, 0.3), 0.5 - 1e-12);
}

TEST(Aupro, MonotoneTransformInvariance) {
    std::mt19937_64 rng(24);
    for (int t = 0; t < 30; ++t) {
        ScoredSet set{random_instance(rng), random_instance(rng)};
        ScoredSet warped = set;
        for (auto& im : warped)
            for (auto& v : im.scores.data) v = std::exp(v) * 3.0f + 1.0f;
        EXPECT_NEAR(aupro(set), aupro(warped), 1e-12);
        EXPECT_NEAR(auroc_pixel(set), auroc_pixel(warped), 1e-12);
    }
}

TEST(Aupro, GridApproximatesExact) {
    std::mt19937_64 rng(25);
    std::normal_distribution<double> noise(0.0, 1.0);
    ScoredSet set;
    for (int k = 0; k < 4; ++k) {
        ScoredImage im{ScalarField(64, 64), Mask(64, 64, 0)};
        for (int y = 10 + k; y < 30; ++y)
            for (int x = 20; x < 40 - k; ++x) im.mask(y, x) = 1;
        for (std::size_t i = 0; i < im.scores.size(); ++i)
            im.scores.data[i] = static_cast<float>(noise(rng) + 1.5 * im.mask.data[i]);
        set.push_back(std::move(im));
    }
    EXPECT_NEAR(aupro(set, 0.3, AuproMethod::grid), aupro(set, 0.3, AuproMethod::exact), 1e-3);
}

TEST(Aupro, RejectsDegenerateInput) {
    ScoredImage normal{ScalarField(3, 3, 0.0f), Mask(3, 3, 0)};
    EXPECT_THROW(aupro({normal}), MetricError);
    ScoredImage full{ScalarField(3, 3, 0.0f), Mask(3, 3, 1)};
    EXPECT_THROW(aupro({full}), MetricError);
    EXPECT_THROW(aupro({full, normal}, 0.0), MetricError);
}

TEST(Components, EightConnectivity) {
    Mask m(4, 4, 0);
    m(0, 0) = m(1, 1) = m(2, 2) = 1;  // diagonal chain: one component
    m(0, 3) = 1;                      // isolated
    const Components c = label_components(m);
    EXPECT_EQ(c.count, 2);
    EXPECT_EQ(c.labels(0, 0), c.labels(2, 2));
    EXPECT_NE(c.labels(0, 3), c.labels(0, 0));
    EXPECT_EQ(c.labels(3, 3), 0);
}

TEST(Components, MatchesOpenCV) {
    std::mt19937_64 rng(26);
    std::bernoulli_distribution on(0.35);
    for (int t = 0; t < 50; ++t) {
        Mask m(16, 16, 0);
        for (auto& v : m.data) v = on(rng);
        cv::Mat cm(16, 16, CV_8U, m.data.data()), labels;
        EXPECT_EQ(label_components(m).count, cv::connectedComponents(cm, labels, 8, CV_32S) - 1);
    }
}

TEST(DDStats, SeparatedGaussiansOverlap) {
    std::mt19937_64 rng(27);
    std::normal_distribution<double> n0(0.0, 1.0), n1(5.0, 1.0);
    std::vector<double> a(100000), b(100000);
    for (auto& x : a) x = n0(rng);
    for (auto& x : b) x = n1(rng);
    const DDStats s = dd_stats(a, b, 100);
    EXPECT_NEAR(s.margin, 5.0, 0.02);
    // Intersection of two unit normals 5 apart: 2 Phi(-2.5).
    EXPECT_NEAR(s.overlap, std::erfc(2.5 / std::sqrt(2.0)), 0.01);
    double mass = 0.0;
    for (double h : s.hist_n) mass += h * s.bin_width;
    EXPECT_NEAR(mass, 1.0, 1e-9);
}

TEST(DDStats, IdenticalAndDisjoint) {
    const std::vector<double> v{0.1, 0.4, 0.4, 0.9};
    EXPECT_NEAR(dd_stats(v, v).overlap, 1.0, 1e-12);
    EXPECT_EQ(dd_stats(v, v).margin, 0.0);
    EXPECT_NEAR(dd_stats({0.0, 0.1}, {3.9, 4.0}).overlap, 0.0, 1e-12);
    const DDStats flat = dd_stats({2.0, 2.0}, {2.0});
    EXPECT_EQ(flat.hist_n.size(), 1u);
    EXPECT_NEAR(flat.overlap, 1.0, 1e-12);
    EXPECT_THROW(dd_stats({}, {1.0}), MetricError);
}
