#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdo/backbone.hpp"
#include "cdo/cdo_loss.hpp"
#include "cdo/dataset.hpp"
#include "cdo/features.hpp"
#include "cdo/perturbation.hpp"

namespace cdo {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DataKind { toy, mvtec };

struct DataConfig {
    DataKind kind = DataKind::toy;
    std::filesystem::path root;  // mvtec only; empty = $CDO_DATA_ROOT
    std::string category = "toy";
    ToyDatasetOptions toy;       // toy.resolution is ignored in favour of RunConfig::resolution
};

struct EvalConfig {
    int last_k = 5;
    double fpr_limit = 0.3;
    double blur_sigma = 0.0;
    int batch_size = 8;
    int dd_bins = 100;
};

struct RunConfig {
    BackboneId backbone = BackboneId::hr32;
    int resolution = 256;
    std::vector<int> hierarchies{1, 2, 3};
    double gamma = kDefaultGamma;
    int epochs = 50;
    int batch_size = 8;
    double learning_rate = 2e-4;
    double weight_decay = 1e-2;
    std::uint64_t seed = 0;
    LossMode loss_mode = LossMode::mom_oom;
    DiscrepancyMode discrepancy = DiscrepancyMode::squared;
    // false: the loss is evaluated per hierarchy and averaged over hierarchies.
    bool pool_hierarchies = true;
    double weight_eps = kWeightEps;
    int keep_last = 5;
    std::filesystem::path weights_dir = "weights";
    PerturbationConfig perturbation;  // perturbation.seed is derived from `seed`
    DataConfig data;
    EvalConfig eval;

    // Throws ConfigError naming the first invalid field.
    void validate() const;
};

// Strict parse: unknown keys and wrongly typed values raise ConfigError naming the field
// and the expected type. Missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
// Every field, including defaults, in a stable key order.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);
// 16 hex digits of FNV-1a over the compact serialisation.
std::string config_hash(const RunConfig& cfg);

DatasetSpec dataset_spec(const RunConfig& cfg);
// Loads (or generates) the configured dataset, train and test splits concatenated.
std::vector<Sample> load_dataset(const RunConfig& cfg);

}  // namespace cdo
