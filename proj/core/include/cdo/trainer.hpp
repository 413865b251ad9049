#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cdo/config.hpp"
#include "cdo/metrics.hpp"
#include "cdo/scoring.hpp"

namespace cdo {

using TensorList = std::vector<std::pair<std::string, Tensor>>;

// Apprentice weights after `epoch` epochs (epoch 0 = random initialisation).
struct Checkpoint {
    int epoch = 0;
    TensorList tensors;
};

struct EpochLog {
    int epoch = 0;     // 1-based
    double mu_n = 0.0;  // batch-averaged mean normal discrepancy
    double mu_s = 0.0;  // batch-averaged mean synthetic discrepancy, over batches that had any
    double loss = 0.0;
    double wall_time = 0.0;  // seconds spent in this epoch
    std::size_t empty_synthetic_steps = 0;
    // Same statistics per hierarchy, in tap order.
    std::vector<double> mu_n_level;
    std::vector<double> mu_s_level;
};

struct TrainResult {
    Checkpoint final_checkpoint;
    std::vector<Checkpoint> epoch_checkpoints;  // the last keep_last epochs, oldest first
    std::vector<EpochLog> logs;
};

struct TrainHooks {
    std::function<void(const EpochLog&)> on_epoch;
    // Sees every perturbed training image: (epoch, dataset index, outcome).
    std::function<void(int, int, const PerturbationOutcome&)> on_perturb;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Trains a fresh apprentice against `expert` on the normal samples. Deterministic in cfg.seed.
// Throws TrainingError on an empty or non-normal dataset and on a non-finite loss (naming
// the epoch and batch).
TrainResult train(const std::vector<Sample>& normals, const RunConfig& cfg, const ExpertModel& expert,
                  const TrainHooks& hooks = {});
// Loads the expert named by cfg first.
TrainResult train(const std::vector<Sample>& normals, const RunConfig& cfg, const TrainHooks& hooks = {});

ExpertModel load_expert(const RunConfig& cfg);
ApprenticeModel apprentice_from(const Checkpoint& ckpt, const RunConfig& cfg);

// Checkpoint archive: apprentice tensors plus meta {backbone, hierarchies, resolution, epoch,
// config}. The expert is never stored.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, const RunConfig& cfg);
std::pair<Checkpoint, RunConfig> load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalMetrics {
    int epoch = 0;
    double auroc = 0.0;
    double aupro = 0.0;
    DDStats dd;  // anomaly-map values on ground-truth normal vs abnormal pixels
};

struct MetricStat {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};
MetricStat summarize(std::span<const double> values);

struct MetricsReport {
    std::string category;
    std::string config_hash;
    int last_k = 5;
    bool insufficient_checkpoints = false;  // fewer than last_k were available
    std::vector<EvalMetrics> per_checkpoint;
    MetricStat auroc;
    MetricStat aupro;
    MetricStat margin;
    MetricStat overlap;
};

// Mean/std over the given per-checkpoint metrics; flags the report when fewer than k.
MetricsReport aggregate(std::vector<EvalMetrics> per_checkpoint, int k);

// Maps for every test sample under one checkpoint; `maps` receives them when non-null.
EvalMetrics evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<Sample>& test, const RunConfig& cfg,
                                const ExpertModel& expert, std::vector<AnomalyMap>* maps = nullptr);

// Stable key order; per-checkpoint histograms are omitted.
nlohmann::ordered_json report_to_json(const MetricsReport& report);

// Scores the last k checkpoints (by epoch) and aggregates them.
MetricsReport evaluate_last_k(const std::vector<Checkpoint>& checkpoints, const std::vector<Sample>& test,
                              const RunConfig& cfg, const ExpertModel& expert, int k = 5);

}  // namespace cdo
