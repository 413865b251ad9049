#include <gtest/gtest.h>

#include <opencv2/imgproc.hpp>
#include <random>

#include "cdo/image.hpp"
#include "test_util.hpp"

using namespace cdo;

TEST(Tensor, StackAndSliceRoundTrip) {
    std::mt19937_64 rng(1);
    std::vector<Tensor> items{test::random_tensor({1, 2, 3, 4}, rng), test::random_tensor({1, 2, 3, 4}, rng)};
    const Tensor b = Tensor::stack(items);
    EXPECT_EQ(b.shape(), (Shape{2, 2, 3, 4}));
    EXPECT_EQ(b.slice(1).storage(), items[1].storage());
}

TEST(Tensor, AccumulateRejectsShapeMismatch) {
    Tensor a({1, 1, 2, 2}, 1.0f), b({1, 1, 2, 3});
    EXPECT_THROW(a += b, ShapeError);
}

TEST(Resize, SameSizeIsIdentity) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<float> u;
    ScalarField f(5, 7);
    for (auto& v : f.data) v = u(rng);
    EXPECT_EQ(resize_bilinear(f, 5, 7), f);
}

TEST(Resize, CheckerboardUpsampleByHand) {
    // 2x2 checkerboard to 4x4, half-pixel centres: source coordinate (x + 0.5) / 2 - 0.5 is
    // clamped to [0, 1], giving interpolation weights 0, 0.25, 0.75, 1 along each axis.
    ScalarField f(2, 2);
    f(0, 0) = 1, f(0, 1) = 0, f(1, 0) = 0, f(1, 1) = 1;
    const ScalarField r = resize_bilinear(f, 4, 4);
    const float t[4] = {0.0f, 0.25f, 0.75f, 1.0f};
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const float expect = (1 - t[y]) * (1 - t[x]) + t[y] * t[x];
            EXPECT_NEAR(r(y, x), expect, 1e-6f) << y << "," << x;
        }
}

TEST(Resize, MatchesOpenCvLinearOnRandomFields) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u;
    for (auto [h, w, oh, ow] : {std::array{5, 7, 13, 11}, std::array{16, 16, 64, 64}, std::array{40, 30, 17, 9}}) {
        ScalarField f(h, w);
        for (auto& v : f.data) v = u(rng);
        cv::Mat src(h, w, CV_32F, f.data.data()), dst;
        cv::resize(src, dst, cv::Size(ow, oh), 0, 0, cv::INTER_LINEAR);
        const ScalarField r = resize_bilinear(f, oh, ow);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) ASSERT_NEAR(r(y, x), dst.at<float>(y, x), 1e-5f);
    }
}

TEST(Resize, NearestKeepsMasksBinary) {
    Mask m(7, 5, 0);
    m(3, 2) = 1, m(0, 0) = 1;
    const Mask r = resize_nearest(m, 16, 16);
    for (auto v : r.data) EXPECT_TRUE(v == 0 || v == 1);
    EXPECT_EQ(r(0, 0), 1);
    EXPECT_GT(count_positive(r), 0u);
}

TEST(Blur, PreservesConstantsAndMass) {
    ScalarField c(9, 9, 2.5f);
    for (float v : gaussian_blur(c, 1.5).data) EXPECT_NEAR(v, 2.5f, 1e-5f);
    ScalarField spike(31, 31, 0.0f);
    spike(15, 15) = 1.0f;
    const ScalarField b = gaussian_blur(spike, 2.0);
    double total = 0;
    for (float v : b.data) total += v;
    EXPECT_NEAR(total, 1.0, 1e-5);
    EXPECT_EQ(gaussian_blur(spike, 0.0), spike);
}

TEST(ImageIo, PngRoundTrips) {
    const auto dir = test::scratch_dir("image_io");
    RgbImage img(4, 6);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 3; ++c) img(y, x, c) = static_cast<float>((y * 6 + x) * 3 + c) / 255.0f;
    write_rgb(dir / "a.png", img);
    const RgbImage back = read_rgb(dir / "a.png");
    ASSERT_EQ(back.h, 4);
    for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-6f);

    Mask m(3, 3, 0);
    m(1, 1) = 1;
    write_mask(dir / "m.png", m);
    EXPECT_EQ(read_mask(dir / "m.png"), m);

    Plane<std::uint16_t> g(2, 3, 0);
    g(1, 2) = 65535, g(0, 1) = 1234;
    write_gray16(dir / "g.png", g);
    EXPECT_EQ(read_gray16(dir / "g.png"), g);

    EXPECT_THROW(read_rgb(dir / "missing.png"), ImageIoError);
}
