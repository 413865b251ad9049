#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdo/image.hpp"
#include "cdo/tensor.hpp"

namespace cdo {

enum class Label { normal, abnormal };
enum class Split { train, test };

const char* to_string(Label l);
const char* to_string(Split s);

struct Sample {
    std::string id;
    RgbImage image;
    std::optional<Mask> mask;  // present for abnormal samples only
    Label label = Label::normal;
    Split split = Split::train;
    std::string defect_type = "good";
};

struct DatasetSpec {
    std::filesystem::path root;
    std::string category;
    int resolution = 256;
    std::array<float, 3> mean{0.485f, 0.456f, 0.406f};  // ImageNet statistics
    std::array<float, 3> std{0.229f, 0.224f, 0.225f};

    // Throws std::invalid_argument on violated invariants.
    void validate() const;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// MVTec layout: <root>/<category>/{train/good, test/<defect>, ground_truth/<defect>/<stem>_mask.png}.
// Samples are ordered lexicographically by relative path.
std::vector<Sample> load_mvtec_category(const DatasetSpec& spec, Split split);

// Checks the Sample invariants; throws DatasetError naming the sample.
void validate_sample(const Sample& s);

// Bilinear resize to R×R then per-channel (x - mean) / std; returns 1×3×R×R.
Tensor preprocess(const Sample& sample, const DatasetSpec& spec);
Tensor preprocess(const RgbImage& image, const DatasetSpec& spec);
// Nearest-neighbour resize of the ground-truth mask to R×R (all-zero when absent).
Mask preprocess_mask(const Sample& sample, const DatasetSpec& spec);
// Inverse of the normalisation step; returns the resized RGB raster.
RgbImage denormalize(const Tensor& tensor, const DatasetSpec& spec, int item = 0);

struct ToyDatasetOptions {
    std::uint64_t seed = 0;
    int n_train = 32;
    int n_test_normal = 8;
    int n_test_abnormal = 16;
    int resolution = 64;
};

// Procedural texture dataset: train normals, then test normals, then test abnormals with
// planted out-of-distribution blobs and exact masks. Deterministic in the seed.
std::vector<Sample> generate_toy_dataset(const ToyDatasetOptions& opt);
std::vector<Sample> generate_toy_dataset(std::uint64_t seed, int n_train, int n_test_normal,
                                         int n_test_abnormal, int resolution);

std::vector<Sample> select_split(const std::vector<Sample>& samples, Split split);

}  // namespace cdo
