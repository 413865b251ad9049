#include <CLI11.hpp>
#include <cstdio>
#include <sstream>

#include <spdlog/spdlog.h>

#include "commands.hpp"

using namespace cdo::cli;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anomaly localisation from expert/apprentice feature discrepancy"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string device = "cpu";
    app.add_option("--device", device, "Compute device (only cpu is available)")->capture_default_str();
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only print warnings and errors");

    TrainOptions train;
    std::uint64_t seed = 0;
    auto* t = app.add_subcommand("train", "Train an apprentice into a new run directory");
    t->add_option("--config", train.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    t->add_option("--runs-root", train.runs_root, "Parent of the timestamped run directory")->capture_default_str();
    t->add_option("--run-dir", train.run_dir, "Exact run directory (skips the timestamped name)");
    auto* seed_opt = t->add_option("--seed", seed, "Override the configured seed");
    t->add_option("--dump-perturbations", train.dump_perturbations, "Keep N perturbed image/mask pairs from epoch 1");

    EvalOptions eval;
    std::string data_root, category;
    int last_k = 0;
    auto* e = app.add_subcommand("eval", "Score the last k checkpoints of a run and write the report bundle");
    e->add_option("--run-dir", eval.run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    auto* root_opt = e->add_option("--data-root", data_root, "Dataset root (default: config, then $CDO_DATA_ROOT)");
    auto* cat_opt = e->add_option("--category", category, "Dataset category");
    auto* k_opt = e->add_option("--last-k", last_k, "Number of trailing checkpoints to aggregate");
    e->add_option("--triptychs", eval.max_triptychs, "Maximum triptych images")->capture_default_str();

    InferOptions infer;
    auto* i = app.add_subcommand("infer", "Write anomaly heatmaps for image files");
    i->add_option("--run-dir", infer.run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    i->add_option("images", infer.images, "Input images")->required()->check(CLI::ExistingFile);
    i->add_option("--out", infer.out_dir, "Output directory (default: <run-dir>/infer)");
    i->add_flag("--csv", infer.csv, "Also write raw scores as CSV");

    SweepOptions sweep;
    std::string values, seeds;
    auto* s = app.add_subcommand("sweep", "Train and evaluate once per value of one configuration axis");
    s->add_option("--config", sweep.config, "Base configuration (JSON)")->required()->check(CLI::ExistingFile);
    s->add_option("--axis", sweep.axis, "gamma, backbone or resolution")
        ->required()
        ->check(CLI::IsMember({"gamma", "backbone", "resolution"}));
    s->add_option("--values", values, "Comma-separated values")->required();
    s->add_option("--seeds", seeds, "Comma-separated seeds; medians are reported");
    s->add_option("--out", sweep.out_csv, "Output CSV (default: sweep_<axis>.csv)");

    std::string bench_dir;
    int n_images = 100;
    auto* b = app.add_subcommand("bench", "Measure end-to-end inference throughput and model size");
    b->add_option("--run-dir", bench_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    b->add_option("--images", n_images, "Number of images to score")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    if (quiet) spdlog::set_level(spdlog::level::warn);

    try {
        if (device != "cpu") throw CliError("--device " + device + " is not available; this build runs on cpu only");
        if (t->parsed()) {
            if (*seed_opt) train.seed = seed;
            std::printf("%s\n", cmd_train(train).string().c_str());
        } else if (e->parsed()) {
            if (*root_opt) eval.data_root = data_root;
            if (*cat_opt) eval.category = category;
            if (*k_opt) eval.last_k = last_k;
            const auto r = cmd_eval(eval);
            std::printf("auroc %.6f +- %.6f\naupro %.6f +- %.6f\n", r.auroc.mean, r.auroc.std, r.aupro.mean, r.aupro.std);
        } else if (i->parsed()) {
            for (const auto& p : cmd_infer(infer)) std::printf("%s\n", p.string().c_str());
        } else if (s->parsed()) {
            sweep.values = split_list(values);
            for (const auto& v : split_list(seeds)) sweep.seeds.push_back(std::stoull(v));
            std::printf("%s\n", cmd_sweep(sweep).string().c_str());
        } else if (b->parsed()) {
            const auto r = cmd_bench(bench_dir, n_images);
            std::printf("fps %.2f\nmodel_size_mib %.3f\nparameters %zu\n", r.fps, r.model_size_mib, r.parameters);
        }
    } catch (const std::exception& ex) {
        spdlog::error("{}", ex.what());
        return 1;
    }
    return 0;
}
