#include <gtest/gtest.h>

#include "cdo/perturbation.hpp"
#include "test_util.hpp"

using namespace cdo;

namespace {

Tensor sample_image(std::uint64_t seed, int r = 32) {
    std::mt19937_64 rng(seed);
    return test::random_tensor({1, 3, r, r}, rng, -2.0f, 2.0f);
}

}  // namespace

TEST(Perturb, ZeroSquaresIsIdentity) {
    PerturbationConfig cfg;
    cfg.min_squares = cfg.max_squares = 0;
    Rng rng(1);
    const Tensor img = sample_image(1);
    const auto out = perturb(img, cfg, rng);
    EXPECT_EQ(out.image.storage(), img.storage());
    EXPECT_EQ(count_positive(out.mask), 0u);
}

TEST(Perturb, FullImageSquareMasksEverything) {
    Rng rng(2);
    const Tensor img = sample_image(2, 16);
    const auto out = apply_squares(img, {{0, 0, 16}}, 0.0, 1.0, rng);
    EXPECT_EQ(count_positive(out.mask), 256u);
}

TEST(Perturb, KnownSquareCoversSideSquared) {
    Rng rng(3);
    const Tensor img = sample_image(3);
    const auto out = apply_squares(img, {{5, 9, 7}}, 0.0, 1.0, rng);
    EXPECT_EQ(count_positive(out.mask), 49u);
    // Clipped at the border: a 6x6 square hanging 2 rows and 3 columns off the top-left.
    const auto clipped = apply_squares(img, {{-2, -3, 6}}, 0.0, 1.0, rng);
    EXPECT_EQ(count_positive(clipped.mask), 4u * 3u);
}

TEST(Perturb, OutsideMaskIsBitExactAndMaskIsUnionOfSquares) {
    PerturbationConfig cfg;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Tensor img = sample_image(seed);
        Rng a(seed), b(seed);
        const auto squares = sample_squares(32, 32, cfg, a);
        const auto out = apply_squares(img, squares, cfg.fill_mean, cfg.fill_std, a);
        const auto again = perturb(img, cfg, b);
        EXPECT_EQ(again.image.storage(), out.image.storage());
        EXPECT_EQ(again.mask, out.mask);

        Mask expect(32, 32, 0);
        for (const auto& s : squares)
            for (int y = std::max(0, s.top); y < std::min(32, s.top + s.side); ++y)
                for (int x = std::max(0, s.left); x < std::min(32, s.left + s.side); ++x) expect(y, x) = 1;
        EXPECT_EQ(out.mask, expect);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x)
                    if (!out.mask(y, x)) ASSERT_EQ(out.image.at(0, c, y, x), img.at(0, c, y, x));
    }
}

TEST(Perturb, SampledSquaresRespectConfig) {
    PerturbationConfig cfg;
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const auto sq = sample_squares(64, 64, cfg, rng);
        ASSERT_GE(sq.size(), 1u);
        ASSERT_LE(sq.size(), 4u);
        for (const auto& s : sq) {
            EXPECT_GE(s.side, 4);
            EXPECT_LE(s.side, 16);
        }
    }
}

TEST(Perturb, FillStatisticsFollowConfiguredGaussian) {
    Rng rng(10);
    const Tensor img(Shape{1, 3, 64, 64}, 7.0f);
    const auto out = apply_squares(img, {{0, 0, 64}}, 0.0, 1.0, rng);
    double sum = 0, sq = 0;
    for (float v : out.image.values()) sum += v, sq += static_cast<double>(v) * v;
    const double n = static_cast<double>(out.image.numel());
    EXPECT_NEAR(sum / n, 0.0, 0.05);
    EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Perturb, ConfigValidation) {
    PerturbationConfig cfg;
    cfg.min_squares = 3, cfg.max_squares = 2;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.max_side_fraction = 1.5;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Partition, AllZeroAndAllOne) {
    EXPECT_EQ(count_positive(partition_pixels(Mask(16, 16, 0), 4, 4)), 0u);
    EXPECT_EQ(count_positive(partition_pixels(Mask(16, 16, 1), 4, 4)), 16u);
}

TEST(Partition, SinglePixelMarksExactlyItsCell) {
    // 8x8 to 4x4: cell (i, j) covers rows 2i..2i+1 and columns 2j..2j+1.
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            Mask m(8, 8, 0);
            m(y, x) = 1;
            const Mask cells = partition_pixels(m, 4, 4);
            ASSERT_EQ(count_positive(cells), 1u);
            EXPECT_EQ(cells(y / 2, x / 2), 1);
        }
}

TEST(Partition, NonDivisibleGridCoversOverlappingRanges) {
    // 10 pixels onto 4 cells: cell i covers [floor(10i/4), ceil(10(i+1)/4)) = [0,3) [2,5) [5,8) [7,10).
    Mask m(1, 10, 0);
    m(0, 2) = 1;
    const Mask cells = partition_pixels(m, 1, 4);
    EXPECT_EQ(cells.data, (std::vector<std::uint8_t>{1, 1, 0, 0}));
}

TEST(Partition, CompleteAndConservative) {
    PerturbationConfig cfg;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        const auto out = perturb(sample_image(seed), cfg, rng);
        for (int f : {32, 16, 8, 4, 3}) {
            const Mask cells = partition_pixels(out.mask, f, f);
            ASSERT_EQ(cells.size(), static_cast<std::size_t>(f * f));
            // Every perturbed pixel lands in at least one marked cell.
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x)
                    if (out.mask(y, x)) ASSERT_EQ(cells(y * f / 32, x * f / 32), 1);
        }
    }
}

TEST(Partition, RejectsFeatureGridLargerThanMask) {
    EXPECT_THROW(partition_pixels(Mask(4, 4, 0), 8, 8), ShapeError);
}
