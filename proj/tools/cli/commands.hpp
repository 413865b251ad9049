#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdo/trainer.hpp"

namespace cdo::cli {

namespace fs = std::filesystem;

class CliError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainOptions {
    fs::path config;
    fs::path runs_root = "runs";  // a timestamped directory is created inside
    fs::path run_dir;             // exact directory; overrides runs_root when set
    std::optional<std::uint64_t> seed;
    int dump_perturbations = 0;   // perturbed image/mask pairs from epoch 1 to keep
};

// Run directory layout:
//   config.json          resolved configuration
//   epoch_log.csv        epoch,mu_n,mu_s,loss,wall_time
//   checkpoints/         epoch_NNNN.cdoa for the last keep_last epochs, final.cdoa
//   debug/               optional perturbation dumps
//   report/              written by eval
fs::path cmd_train(const TrainOptions& opt);

struct EvalOptions {
    fs::path run_dir;
    std::optional<fs::path> data_root;
    std::optional<std::string> category;
    std::optional<int> last_k;
    int max_triptychs = 8;
};
// Writes report/{metrics.json, dd_histogram.png, curves.png, triptychs/*.png, bundle.json}.
MetricsReport cmd_eval(const EvalOptions& opt);

struct InferOptions {
    fs::path run_dir;
    std::vector<fs::path> images;
    fs::path out_dir;  // default <run_dir>/infer
    bool csv = false;
};
// One 16-bit heatmap PNG plus JSON sidecar per image; returns the PNG paths.
std::vector<fs::path> cmd_infer(const InferOptions& opt);

struct SweepOptions {
    fs::path config;
    std::string axis;  // gamma | backbone | resolution
    std::vector<std::string> values;
    std::vector<std::uint64_t> seeds;  // empty = the config seed
    fs::path out_csv;
};
// One train+eval per (value, seed); CSV rows (value, auroc, aupro, seeds) hold medians over seeds.
fs::path cmd_sweep(const SweepOptions& opt);

struct BenchResult {
    double fps = 0.0;
    double model_size_mib = 0.0;
    std::size_t parameters = 0;
    int n_images = 0;
};
// Times decode + preprocess + scoring of n_images PNG files, one at a time.
BenchResult cmd_bench(const fs::path& run_dir, int n_images);

// Bytes of every floating-point parameter of expert and apprentice, in MiB.
double model_size_mib(const ExpertModel& expert, const ApprenticeModel& apprentice);

void write_epoch_log(const fs::path& path, const std::vector<EpochLog>& logs);
std::vector<EpochLog> read_epoch_log(const fs::path& path);

// report_to_json plus the per-category block.
nlohmann::ordered_json metrics_json(const MetricsReport& report);

}  // namespace cdo::cli
