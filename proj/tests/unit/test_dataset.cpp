#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cdo/dataset.hpp"
#include "test_util.hpp"

using namespace cdo;
namespace fs = std::filesystem;

namespace {

RgbImage flat(int h, int w, float v) { return RgbImage(h, w, v); }

// Builds a miniature MVTec tree: 3 train images, test/good (1), test/crack (2), test/hole (empty).
fs::path make_tree(const std::string& name, bool drop_one_mask = false) {
    const auto root = test::scratch_dir(name);
    const auto cat = root / "widget";
    for (auto d : {"train/good", "test/good", "test/crack", "test/hole", "ground_truth/crack"})
        fs::create_directories(cat / d);
    for (auto f : {"002.png", "000.png", "001.png"}) write_rgb(cat / "train/good" / f, flat(8, 8, 0.5f));
    std::ofstream(cat / "train/good/readme.txt") << "not an image";
    write_rgb(cat / "test/good/000.png", flat(8, 8, 0.4f));
    write_rgb(cat / "test/crack/000.png", flat(8, 8, 0.3f));
    write_rgb(cat / "test/crack/001.png", flat(8, 8, 0.2f));
    Mask m(8, 8, 0);
    m(2, 3) = 1;
    write_mask(cat / "ground_truth/crack/000_mask.png", m);
    if (!drop_one_mask) write_mask(cat / "ground_truth/crack/001_mask.png", m);
    return root;
}

}  // namespace

TEST(MvtecLoader, OrdersLexicographicallyAndSkipsNonImages) {
    DatasetSpec spec{make_tree("mvtec_order"), "widget", 32};
    const auto train = load_mvtec_category(spec, Split::train);
    ASSERT_EQ(train.size(), 3u);
    EXPECT_EQ(train[0].id, "widget/train/good/000.png");
    EXPECT_EQ(train[2].id, "widget/train/good/002.png");
    for (const auto& s : train) {
        EXPECT_FALSE(s.mask.has_value());
        EXPECT_EQ(s.label, Label::normal);
    }
}

TEST(MvtecLoader, TestSplitCarriesMasksForDefectsOnly) {
    DatasetSpec spec{make_tree("mvtec_test"), "widget", 32};
    const auto test = load_mvtec_category(spec, Split::test);
    ASSERT_EQ(test.size(), 3u);  // crack/000, crack/001, good/000; hole is empty
    EXPECT_EQ(test[0].defect_type, "crack");
    EXPECT_EQ(test[2].defect_type, "good");
    EXPECT_FALSE(test[2].mask.has_value());
    ASSERT_TRUE(test[0].mask.has_value());
    EXPECT_EQ(count_positive(*test[0].mask), 1u);
    for (auto v : test[0].mask->data) EXPECT_TRUE(v == 0 || v == 1);
}

TEST(MvtecLoader, RepeatedLoadsAreIdentical) {
    DatasetSpec spec{make_tree("mvtec_repeat"), "widget", 32};
    const auto a = load_mvtec_category(spec, Split::test);
    const auto b = load_mvtec_category(spec, Split::test);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_EQ(a[i].image, b[i].image);
    }
}

TEST(MvtecLoader, MissingMaskNamesTheFile) {
    DatasetSpec spec{make_tree("mvtec_missing", true), "widget", 32};
    try {
        load_mvtec_category(spec, Split::test);
        FAIL() << "expected DatasetError";
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("001_mask.png"), std::string::npos) << e.what();
    }
}

TEST(MvtecLoader, MissingCategoryIsAnError) {
    DatasetSpec spec{test::scratch_dir("mvtec_none"), "widget", 32};
    EXPECT_THROW(load_mvtec_category(spec, Split::train), DatasetError);
}

TEST(Preprocess, ConstantMeanImageNormalisesToZero) {
    DatasetSpec spec;
    spec.resolution = 32;
    spec.std = {1.0f, 1.0f, 1.0f};
    RgbImage img(20, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x)
            for (int c = 0; c < 3; ++c) img(y, x, c) = spec.mean[c];
    const Tensor t = preprocess(img, spec);
    EXPECT_EQ(t.shape(), (Shape{1, 3, 32, 32}));
    for (float v : t.values()) EXPECT_NEAR(v, 0.0f, 1e-7f);
}

TEST(Preprocess, DenormaliseRecoversResizedPixels) {
    DatasetSpec spec;
    spec.resolution = 48;
    const auto samples = generate_toy_dataset(5, 2, 0, 0, 64);
    for (const auto& s : samples) {
        const Tensor t = preprocess(s, spec);
        const RgbImage back = denormalize(t, spec);
        const RgbImage resized = resize_bilinear(s.image, 48, 48);
        for (std::size_t i = 0; i < back.data.size(); ++i) ASSERT_NEAR(back.data[i], resized.data[i], 1e-6f);
    }
}

TEST(Preprocess, MaskUsesNearestNeighbour) {
    auto samples = generate_toy_dataset(9, 0, 0, 2, 64);
    DatasetSpec spec;
    spec.resolution = 32;
    for (const auto& s : samples) {
        const Mask m = preprocess_mask(s, spec);
        EXPECT_EQ(m, resize_nearest(*s.mask, 32, 32));
    }
}

TEST(ToyDataset, SameSeedIsBitwiseIdentical) {
    const auto a = generate_toy_dataset(11, 4, 2, 3, 64);
    const auto b = generate_toy_dataset(11, 4, 2, 3, 64);
    ASSERT_EQ(a.size(), 9u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].id, b[i].id);
        EXPECT_EQ(a[i].image, b[i].image);
        EXPECT_EQ(a[i].mask, b[i].mask);
    }
    const auto c = generate_toy_dataset(12, 4, 2, 3, 64);
    EXPECT_NE(a[0].image, c[0].image);
}

TEST(ToyDataset, NoAbnormalsMeansNoMasks) {
    for (const auto& s : generate_toy_dataset(3, 2, 3, 0, 64)) EXPECT_FALSE(s.mask.has_value());
}

TEST(ToyDataset, SamplesSatisfyInvariants) {
    const auto all = generate_toy_dataset(4, 6, 4, 8, 64);
    for (const auto& s : all) {
        EXPECT_NO_THROW(validate_sample(s)) << s.id;
        for (float v : s.image.data) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
        if (s.split == Split::train) EXPECT_EQ(s.label, Label::normal);
        if (s.label == Label::abnormal) {
            ASSERT_TRUE(s.mask.has_value());
            EXPECT_GT(count_positive(*s.mask), 0u);
            for (auto v : s.mask->data) EXPECT_TRUE(v == 0 || v == 1);
        }
    }
    EXPECT_EQ(select_split(all, Split::train).size(), 6u);
    EXPECT_EQ(select_split(all, Split::test).size(), 12u);
}

TEST(ToyDataset, RejectsNegativeCounts) {
    EXPECT_THROW(generate_toy_dataset(1, -1, 0, 0, 64), std::invalid_argument);
}

TEST(Sample, ValidationCatchesBrokenInvariants) {
    Sample s;
    s.id = "x";
    s.image = RgbImage(4, 4);
    s.label = Label::abnormal;
    s.split = Split::test;
    EXPECT_THROW(validate_sample(s), DatasetError);  // no mask
    s.mask = Mask(3, 4, 1);
    EXPECT_THROW(validate_sample(s), DatasetError);  // size mismatch
    s.mask = Mask(4, 4, 1);
    EXPECT_NO_THROW(validate_sample(s));
    s.split = Split::train;
    EXPECT_THROW(validate_sample(s), DatasetError);
}
