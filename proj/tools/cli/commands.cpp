#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <sstream>

#include <spdlog/spdlog.h>

#include "cdo/image.hpp"
#include "plots.hpp"

namespace cdo::cli {
namespace {

constexpr const char* kConfigFile = "config.json";
constexpr const char* kEpochLog = "epoch_log.csv";
constexpr const char* kCheckpointDir = "checkpoints";
constexpr const char* kFinal = "final.cdoa";

std::string timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
    return buf;
}

// File-name-safe version of a sample id ("toy/test/blob_003" -> "toy_test_blob_003").
std::string safe_name(std::string id) {
    for (char& c : id)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    return id;
}

fs::path checkpoint_name(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04d.cdoa", epoch);
    return buf;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw CliError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void write_png(const fs::path& path, const cv::Mat& m) {
    if (!cv::imwrite(path.string(), m)) throw CliError("cannot write " + path.string());
}

RunConfig run_config(const fs::path& run_dir) {
    const fs::path p = run_dir / kConfigFile;
    if (!fs::exists(p)) throw CliError(run_dir.string() + " is not a run directory (no " + kConfigFile + ")");
    return load_config(p);
}

// Epoch checkpoints, oldest first; falls back to final.cdoa when a run trained zero epochs.
std::vector<Checkpoint> run_checkpoints(const fs::path& run_dir) {
    std::vector<fs::path> files;
    const fs::path dir = run_dir / kCheckpointDir;
    if (fs::exists(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().filename().string().starts_with("epoch_")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty() && fs::exists(dir / kFinal)) files.push_back(dir / kFinal);
    if (files.empty()) throw CliError("no checkpoints under " + dir.string());
    std::vector<Checkpoint> out;
    for (const auto& f : files) out.push_back(load_checkpoint(f).first);
    return out;
}

Checkpoint final_checkpoint(const fs::path& run_dir) {
    const fs::path p = run_dir / kCheckpointDir / kFinal;
    if (!fs::exists(p)) throw CliError("missing " + p.string());
    return load_checkpoint(p).first;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void write_epoch_log(const fs::path& path, const std::vector<EpochLog>& logs) {
    std::ofstream out(path);
    if (!out) throw CliError("cannot write " + path.string());
    out << "epoch,mu_n,mu_s,loss,wall_time\n";
    char buf[160];
    for (const auto& l : logs) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.6f\n", l.epoch, l.mu_n, l.mu_s, l.loss, l.wall_time);
        out << buf;
    }
}

std::vector<EpochLog> read_epoch_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw CliError("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<EpochLog> logs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochLog l;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &l.epoch, &l.mu_n, &l.mu_s, &l.loss, &l.wall_time) != 5)
            throw CliError("malformed row in " + path.string() + ": " + line);
        logs.push_back(l);
    }
    return logs;
}

nlohmann::ordered_json metrics_json(const MetricsReport& r) {
    nlohmann::ordered_json j = report_to_json(r);
    j["per_category"] = {{r.category, {{"auroc", j["auroc"]}, {"aupro", j["aupro"]}}}};
    return j;
}

double model_size_mib(const ExpertModel& expert, const ApprenticeModel& apprentice) {
    const double bytes = static_cast<double>(expert.parameter_count() + apprentice.parameter_count()) * sizeof(float);
    return bytes / (1024.0 * 1024.0);
}

fs::path cmd_train(const TrainOptions& opt) {
    RunConfig cfg = load_config(opt.config);
    if (opt.seed) {
        cfg.seed = *opt.seed;
        cfg.perturbation.seed = *opt.seed;
    }
    const std::string hash = config_hash(cfg);
    fs::path dir = opt.run_dir;
    if (dir.empty()) {
        const std::string stem = timestamp() + "-" + cfg.data.category + "-" + hash.substr(0, 8);
        dir = opt.runs_root / stem;
        for (int i = 1; fs::exists(dir); ++i) dir = opt.runs_root / (stem + "-" + std::to_string(i));
    }
    fs::create_directories(dir / kCheckpointDir);
    write_json(dir / kConfigFile, config_to_json(cfg));
    spdlog::info("run directory {}", dir.string());

    const auto data = load_dataset(cfg);
    const auto normals = select_split(data, Split::train);
    const ExpertModel expert = load_expert(cfg);
    const DatasetSpec spec = dataset_spec(cfg);

    TrainHooks hooks;
    hooks.on_epoch = [](const EpochLog& l) {
        spdlog::info("epoch {:4d}  mu_n {:.4f}  mu_s {:.4f}  loss {:+.4f}  {:.1f}s", l.epoch, l.mu_n, l.mu_s, l.loss,
                     l.wall_time);
    };
    int dumped = 0;
    if (opt.dump_perturbations > 0) {
        fs::create_directories(dir / "debug");
        hooks.on_perturb = [&](int epoch, int idx, const PerturbationOutcome& o) {
            if (epoch != 1 || dumped >= opt.dump_perturbations) return;
            char stem[64];
            std::snprintf(stem, sizeof stem, "perturbed_%04d", idx);
            write_rgb(dir / "debug" / (std::string(stem) + "_image.png"), denormalize(o.image, spec));
            write_mask(dir / "debug" / (std::string(stem) + "_mask.png"), o.mask);
            ++dumped;
        };
    }

    const TrainResult r = train(normals, cfg, expert, hooks);
    write_epoch_log(dir / kEpochLog, r.logs);
    for (const auto& c : r.epoch_checkpoints) save_checkpoint(dir / kCheckpointDir / checkpoint_name(c.epoch), c, cfg);
    save_checkpoint(dir / kCheckpointDir / kFinal, r.final_checkpoint, cfg);
    for (const auto& l : r.logs)
        if (l.empty_synthetic_steps)
            spdlog::warn("epoch {}: {} step(s) had no synthetic cells; loss fell back to the normal mean", l.epoch,
                         l.empty_synthetic_steps);
    return dir;
}

MetricsReport cmd_eval(const EvalOptions& opt) {
    RunConfig cfg = run_config(opt.run_dir);
    if (opt.data_root) cfg.data.root = *opt.data_root;
    if (opt.category) cfg.data.category = *opt.category;
    const int k = opt.last_k.value_or(cfg.eval.last_k);
    if (k < 1) throw CliError("--last-k must be >= 1");

    const auto data = load_dataset(cfg);
    const auto test = select_split(data, Split::test);
    const ExpertModel expert = load_expert(cfg);
    const auto checkpoints = run_checkpoints(opt.run_dir);

    MetricsReport report = evaluate_last_k(checkpoints, test, cfg, expert, k);
    if (report.insufficient_checkpoints)
        spdlog::warn("only {} checkpoint(s) available for last-{} aggregation", report.per_checkpoint.size(), k);

    const fs::path out = opt.run_dir / "report";
    fs::create_directories(out / "triptychs");
    write_json(out / "metrics.json", metrics_json(report));

    // Plots and maps come from the newest checkpoint.
    std::vector<AnomalyMap> maps;
    const EvalMetrics last = evaluate_checkpoint(checkpoints.back(), test, cfg, expert, &maps);
    write_png(out / "dd_histogram.png", dd_histogram_plot(last.dd));
    const fs::path log_path = opt.run_dir / kEpochLog;
    write_png(out / "curves.png", curves_plot(fs::exists(log_path) ? read_epoch_log(log_path) : std::vector<EpochLog>{}));

    float lo = 0.0f, hi = 0.0f;
    for (const auto& m : maps) {
        const auto [a, b] = std::minmax_element(m.scores.data.begin(), m.scores.data.end());
        lo = std::min(lo, *a), hi = std::max(hi, *b);
    }
    const DatasetSpec spec = dataset_spec(cfg);
    nlohmann::ordered_json heatmaps = nlohmann::ordered_json::array();
    // Abnormal samples first, then one normal sample for contrast.
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < test.size(); ++i)
        if (test[i].label == Label::abnormal && static_cast<int>(picks.size()) + 1 < opt.max_triptychs) picks.push_back(i);
    for (std::size_t i = 0; i < test.size(); ++i)
        if (test[i].label == Label::normal && static_cast<int>(picks.size()) < opt.max_triptychs) {
            picks.push_back(i);
            break;
        }
    for (std::size_t i : picks) {
        const RgbImage input = denormalize(preprocess(test[i], spec), spec);
        const fs::path name = fs::path("triptychs") / (safe_name(test[i].id) + ".png");
        write_png(out / name, triptych(input, preprocess_mask(test[i], spec), maps[i].scores, lo, hi));
        heatmaps.push_back(name.string());
    }

    const nlohmann::ordered_json bundle{{"metrics", "metrics.json"},
                                        {"dd_plot", "dd_histogram.png"},
                                        {"curves", "curves.png"},
                                        {"heatmaps", heatmaps},
                                        {"checkpoint_epoch", last.epoch}};
    write_json(out / "bundle.json", bundle);
    for (const auto& f : {std::string("metrics.json"), std::string("dd_histogram.png"), std::string("curves.png")})
        if (!fs::exists(out / f)) throw CliError("report artifact missing: " + f);
    for (const auto& h : heatmaps)
        if (!fs::exists(out / h.get<std::string>())) throw CliError("report artifact missing: " + h.get<std::string>());

    spdlog::info("AU-ROC {:.4f} ± {:.4f}  AU-PRO {:.4f} ± {:.4f}  ({} checkpoint(s))", report.auroc.mean,
                 report.auroc.std, report.aupro.mean, report.aupro.std, report.per_checkpoint.size());
    return report;
}

std::vector<fs::path> cmd_infer(const InferOptions& opt) {
    if (opt.images.empty()) throw CliError("infer needs at least one image");
    const RunConfig cfg = run_config(opt.run_dir);
    const ExpertModel expert = load_expert(cfg);
    const ApprenticeModel apprentice = apprentice_from(final_checkpoint(opt.run_dir), cfg);
    const DatasetSpec spec = dataset_spec(cfg);
    const ScoringOptions scoring{cfg.discrepancy, cfg.eval.blur_sigma};
    const fs::path out = opt.out_dir.empty() ? opt.run_dir / "infer" : opt.out_dir;
    fs::create_directories(out);

    std::vector<fs::path> written;
    for (const auto& path : opt.images) {
        const Tensor x = preprocess(read_rgb(path), spec);
        const AnomalyMap m = anomaly_map(x, path.string(), expert, apprentice, cfg.hierarchies, scoring);
        const fs::path png = out / (path.stem().string() + "_map.png");
        save_heatmap(png, m);
        if (opt.csv) save_map_csv(out / (path.stem().string() + "_map.csv"), m);
        spdlog::info("{}: image score {:.4f}", path.string(), image_score(m));
        written.push_back(png);
    }
    return written;
}

fs::path cmd_sweep(const SweepOptions& opt) {
    if (opt.values.empty()) throw CliError("sweep needs at least one value");
    const RunConfig base = load_config(opt.config);
    // No explicit seeds: one run with the config's own seeds, as cmd_train would do.
    std::vector<std::optional<std::uint64_t>> seeds(opt.seeds.begin(), opt.seeds.end());
    if (seeds.empty()) seeds.emplace_back();

    std::vector<RunConfig> variants;
    for (const auto& v : opt.values) {
        RunConfig c = base;
        try {
            if (opt.axis == "gamma") c.gamma = std::stod(v);
            else if (opt.axis == "backbone") c.backbone = parse_backbone(v);
            else if (opt.axis == "resolution") c.resolution = std::stoi(v);
            else throw CliError("unknown sweep axis '" + opt.axis + "' (expected gamma, backbone or resolution)");
        } catch (const std::logic_error&) {
            throw CliError("invalid " + opt.axis + " value '" + v + "'");
        }
        c.validate();
        variants.push_back(c);
    }

    const fs::path out = opt.out_csv.empty() ? fs::path("sweep_" + opt.axis + ".csv") : opt.out_csv;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream csv(out);
    if (!csv) throw CliError("cannot write " + out.string());
    csv << "value,auroc,aupro,seeds\n";
    for (std::size_t i = 0; i < variants.size(); ++i) {
        std::vector<double> roc, pro;
        for (auto seed : seeds) {
            RunConfig c = variants[i];
            if (seed) {
                c.seed = *seed;
                c.perturbation.seed = *seed;
            }
            const auto data = load_dataset(c);
            const ExpertModel expert = load_expert(c);
            const TrainResult r = train(select_split(data, Split::train), c, expert);
            const auto cks = r.epoch_checkpoints.empty() ? std::vector<Checkpoint>{r.final_checkpoint} : r.epoch_checkpoints;
            const MetricsReport rep = evaluate_last_k(cks, select_split(data, Split::test), c, expert, c.eval.last_k);
            roc.push_back(rep.auroc.mean);
            pro.push_back(rep.aupro.mean);
            spdlog::info("{}={} seed {}: AU-ROC {:.4f} AU-PRO {:.4f}", opt.axis, opt.values[i], c.seed, rep.auroc.mean,
                         rep.aupro.mean);
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%zu\n", median(roc), median(pro), seeds.size());
        csv << opt.values[i] << buf;
    }
    return out;
}

BenchResult cmd_bench(const fs::path& run_dir, int n_images) {
    if (n_images <= 0) throw CliError("bench needs n_images >= 1");
    const RunConfig cfg = run_config(run_dir);
    const ExpertModel expert = load_expert(cfg);
    const ApprenticeModel apprentice = apprentice_from(final_checkpoint(run_dir), cfg);
    const DatasetSpec spec = dataset_spec(cfg);

    // Inputs are staged as PNG files so decoding is part of the timed path.
    const auto data = load_dataset(cfg);
    const auto test = select_split(data, Split::test);
    if (test.empty()) throw CliError("bench needs a test split to draw images from");
    const fs::path stage = run_dir / "bench_inputs";
    fs::create_directories(stage);
    std::vector<fs::path> files;
    for (int i = 0; i < std::min<int>(n_images, static_cast<int>(test.size())); ++i) {
        files.push_back(stage / (safe_name(test[i].id) + ".png"));
        if (!fs::exists(files.back())) write_rgb(files.back(), test[i].image);
    }

    const ScoringOptions scoring{cfg.discrepancy, cfg.eval.blur_sigma};
    (void)anomaly_map(preprocess(read_rgb(files[0]), spec), "warmup", expert, apprentice, cfg.hierarchies, scoring);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < n_images; ++i) {
        const fs::path& f = files[static_cast<std::size_t>(i) % files.size()];
        (void)anomaly_map(preprocess(read_rgb(f), spec), f.string(), expert, apprentice, cfg.hierarchies, scoring);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    BenchResult r;
    r.n_images = n_images;
    r.fps = n_images / secs;
    r.parameters = expert.parameter_count() + apprentice.parameter_count();
    r.model_size_mib = model_size_mib(expert, apprentice);
    write_json(run_dir / "bench.json", {{"fps", r.fps},
                                        {"model_size_mib", r.model_size_mib},
                                        {"parameters", r.parameters},
                                        {"n_images", r.n_images},
                                        {"resolution", cfg.resolution},
                                        {"backbone", std::string(backbone_label(cfg.backbone))}});
    return r;
}

}  // namespace cdo::cli
