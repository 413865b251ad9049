#include "cdo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cdo/rng.hpp"

namespace cdo {
namespace fs = std::filesystem;

const char* to_string(Label l) { return l == Label::normal ? "normal" : "abnormal"; }
const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

void DatasetSpec::validate() const {
    if (resolution < 32) {
        throw std::invalid_argument("dataset.resolution must be >= 32, got " + std::to_string(resolution));
    }
    for (float s : std) {
        if (!(s > 0.0f)) throw std::invalid_argument("dataset.std entries must be positive");
    }
}

namespace {

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) return files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
    return files;
}

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end(),
              [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
    return dirs;
}

}  // namespace

void validate_sample(const Sample& s) {
    if (s.mask && (s.mask->h != s.image.h || s.mask->w != s.image.w)) {
        throw DatasetError("sample " + s.id + ": mask size differs from image size");
    }
    if (s.label == Label::abnormal) {
        if (!s.mask || count_positive(*s.mask) == 0) {
            throw DatasetError("sample " + s.id + ": abnormal sample without positive mask pixels");
        }
        if (s.split == Split::train) throw DatasetError("sample " + s.id + ": abnormal sample in train split");
    } else if (s.mask && count_positive(*s.mask) != 0) {
        throw DatasetError("sample " + s.id + ": normal sample with positive mask pixels");
    }
}

std::vector<Sample> load_mvtec_category(const DatasetSpec& spec, Split split) {
    spec.validate();
    const fs::path base = spec.root / spec.category;
    if (!fs::is_directory(base)) throw DatasetError("dataset category directory not found: " + base.string());

    std::vector<Sample> out;
    if (split == Split::train) {
        const fs::path good = base / "train" / "good";
        if (!fs::is_directory(good)) throw DatasetError("missing directory: " + good.string());
        for (const auto& f : sorted_images(good)) {
            Sample s;
            s.id = spec.category + "/train/good/" + f.filename().string();
            s.image = read_rgb(f);
            s.label = Label::normal;
            s.split = Split::train;
            out.push_back(std::move(s));
        }
        return out;
    }

    const fs::path test = base / "test";
    if (!fs::is_directory(test)) throw DatasetError("missing directory: " + test.string());
    for (const auto& defect_dir : sorted_subdirs(test)) {
        const std::string defect = defect_dir.filename().string();
        for (const auto& f : sorted_images(defect_dir)) {
            Sample s;
            s.id = spec.category + "/test/" + defect + "/" + f.filename().string();
            s.image = read_rgb(f);
            s.split = Split::test;
            s.defect_type = defect;
            if (defect == "good") {
                s.label = Label::normal;
            } else {
                s.label = Label::abnormal;
                const fs::path mask_path =
                    base / "ground_truth" / defect / (f.stem().string() + "_mask.png");
                if (!fs::exists(mask_path)) {
                    throw DatasetError("missing mask for abnormal test image " + f.string() +
                                       " (expected " + mask_path.string() + ")");
                }
                s.mask = read_mask(mask_path);
            }
            validate_sample(s);
            out.push_back(std::move(s));
        }
    }
    return out;
}

Tensor preprocess(const RgbImage& image, const DatasetSpec& spec) {
    const int r = spec.resolution;
    const RgbImage resized = resize_bilinear(image, r, r);
    Tensor t(Shape{1, 3, r, r});
    for (int c = 0; c < 3; ++c) {
        const float mean = spec.mean[c];
        const float inv = 1.0f / spec.std[c];
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) t.at(0, c, y, x) = (resized(y, x, c) - mean) * inv;
    }
    return t;
}

Tensor preprocess(const Sample& sample, const DatasetSpec& spec) { return preprocess(sample.image, spec); }

Mask preprocess_mask(const Sample& sample, const DatasetSpec& spec) {
    if (!sample.mask) return Mask(spec.resolution, spec.resolution, 0);
    return resize_nearest(*sample.mask, spec.resolution, spec.resolution);
}

RgbImage denormalize(const Tensor& tensor, const DatasetSpec& spec, int item) {
    const Shape& s = tensor.shape();
    RgbImage img(s.h, s.w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) img(y, x, c) = tensor.at(item, c, y, x) * spec.std[c] + spec.mean[c];
    return img;
}

std::vector<Sample> select_split(const std::vector<Sample>& samples, Split split) {
    std::vector<Sample> out;
    for (const auto& s : samples) {
        if (s.split == split) out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Toy dataset

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Coarse uniform grid bilinearly upsampled to res×res.
ScalarField value_noise(Rng& rng, int grid, int res, float amplitude) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    ScalarField coarse(grid, grid);
    for (auto& v : coarse.data) v = u(rng) * amplitude;
    return resize_bilinear(coarse, res, res);
}

// Per-pixel grain std and defect blend weight.
constexpr float kToyGrain = 0.3f;
constexpr float kToyDefect = 0.5f;

RgbImage toy_normal(Rng& rng, int res) {
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    std::uniform_real_distribution<double> jitter(-0.8, 0.8);
    std::uniform_real_distribution<float> bright(-0.05f, 0.05f);
    std::normal_distribution<float> grain(0.0f, kToyGrain);

    const double angle = 0.5 + jitter(rng);
    const double cycles = 6.0;
    const double phi = phase(rng);
    const float offset = bright(rng);
    const ScalarField low = value_noise(rng, 8, res, 0.08f);

    const float base[3] = {0.55f, 0.45f, 0.35f};
    const float tint[3] = {0.20f, 0.16f, 0.10f};
    const double kx = std::cos(angle) * cycles * kTwoPi / res;
    const double ky = std::sin(angle) * cycles * kTwoPi / res;

    RgbImage img(res, res);
    for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
            const float stripe = static_cast<float>(std::sin(kx * x + ky * y + phi));
            const float g = grain(rng);  // achromatic: shared by all channels
            for (int c = 0; c < 3; ++c) {
                const float v = base[c] + offset + tint[c] * stripe + low(y, x) + g;
                img(y, x, c) = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    return img;
}

// Plants one or two elliptical blobs of foreign texture; the returned mask is their exact union.
Mask plant_blobs(Rng& rng, RgbImage& img) {
    const int res = img.h;
    std::uniform_int_distribution<int> count(1, 2);
    std::uniform_int_distribution<int> kind_dist(0, 2);
    std::uniform_real_distribution<double> radius(res / 14.0, res / 6.0);
    std::uniform_real_distribution<double> centre(res * 0.15, res * 0.85);
    std::uniform_real_distribution<double> tilt(0.0, std::numbers::pi);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    std::normal_distribution<float> speckle(0.0f, 0.25f * kToyDefect);

    Mask mask(res, res, 0);
    const int blobs = count(rng);
    for (int b = 0; b < blobs; ++b) {
        const double cy = centre(rng), cx = centre(rng);
        const double ry = radius(rng), rx = radius(rng);
        const double rot = tilt(rng);
        const int kind = kind_dist(rng);
        const double phi = phase(rng);
        const double ca = std::cos(rot), sa = std::sin(rot);
        const double fk = 14.0 * kTwoPi / res;
        for (int y = 0; y < res; ++y) {
            for (int x = 0; x < res; ++x) {
                const double dy = y - cy, dx = x - cx;
                const double u = (dx * ca + dy * sa) / rx;
                const double v = (-dx * sa + dy * ca) / ry;
                if (u * u + v * v > 1.0) continue;
                mask(y, x) = 1;
                switch (kind) {
                    case 0: {  // colour shift
                        img(y, x, 0) = std::clamp(img(y, x, 0) - 0.35f * kToyDefect, 0.0f, 1.0f);
                        img(y, x, 1) = std::clamp(img(y, x, 1) + 0.10f * kToyDefect, 0.0f, 1.0f);
                        img(y, x, 2) = std::clamp(img(y, x, 2) + 0.35f * kToyDefect, 0.0f, 1.0f);
                        break;
                    }
                    case 1: {  // fine stripes across the grain
                        const float s = static_cast<float>(std::sin(fk * (-x * sa + y * ca) + phi));
                        for (int c = 0; c < 3; ++c) {
                            const float blend = (1.0f - kToyDefect) * img(y, x, c) + kToyDefect * (0.5f + 0.3f * s);
                            img(y, x, c) = std::clamp(blend, 0.0f, 1.0f);
                        }
                        break;
                    }
                    default: {  // speckle
                        for (int c = 0; c < 3; ++c)
                            img(y, x, c) = std::clamp(img(y, x, c) + speckle(rng), 0.0f, 1.0f);
                        break;
                    }
                }
            }
        }
    }
    return mask;
}

}  // namespace

std::vector<Sample> generate_toy_dataset(const ToyDatasetOptions& opt) {
    if (opt.n_train < 0 || opt.n_test_normal < 0 || opt.n_test_abnormal < 0) {
        throw std::invalid_argument("toy dataset counts must be >= 0");
    }
    if (opt.resolution < 32) throw std::invalid_argument("toy dataset resolution must be >= 32");

    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(opt.n_train + opt.n_test_normal + opt.n_test_abnormal));
    auto name = [](const char* prefix, int i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s_%04d", prefix, i);
        return std::string(buf);
    };

    for (int i = 0; i < opt.n_train; ++i) {
        Rng rng = make_rng(opt.seed, {1, static_cast<std::uint64_t>(i)});
        Sample s;
        s.id = name("toy/train/good", i);
        s.image = toy_normal(rng, opt.resolution);
        s.split = Split::train;
        out.push_back(std::move(s));
    }
    for (int i = 0; i < opt.n_test_normal; ++i) {
        Rng rng = make_rng(opt.seed, {2, static_cast<std::uint64_t>(i)});
        Sample s;
        s.id = name("toy/test/good", i);
        s.image = toy_normal(rng, opt.resolution);
        s.split = Split::test;
        out.push_back(std::move(s));
    }
    for (int i = 0; i < opt.n_test_abnormal; ++i) {
        Rng rng = make_rng(opt.seed, {3, static_cast<std::uint64_t>(i)});
        Sample s;
        s.id = name("toy/test/blob", i);
        s.image = toy_normal(rng, opt.resolution);
        s.mask = plant_blobs(rng, s.image);
        s.split = Split::test;
        s.label = Label::abnormal;
        s.defect_type = "blob";
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> generate_toy_dataset(std::uint64_t seed, int n_train, int n_test_normal,
                                         int n_test_abnormal, int resolution) {
    return generate_toy_dataset(ToyDatasetOptions{seed, n_train, n_test_normal, n_test_abnormal, resolution});
}

}  // namespace cdo
