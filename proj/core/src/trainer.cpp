#include "cdo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cdo/archive.hpp"
#include "cdo/optim.hpp"
#include "cdo/rng.hpp"

namespace cdo {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5f1e;
constexpr std::uint64_t kPerturbStream = 0x9e27;

// Where a pooled discrepancy entry came from: level, batch item, flat cell index.
struct CellRef {
    int level;
    int item;
    std::size_t cell;
};

struct Partitioned {
    std::vector<DDBatch> batches;  // one per group (a single group when pooled)
    std::vector<std::vector<CellRef>> n_refs;
    std::vector<std::vector<CellRef>> s_refs;
};

Partitioned partition_field(const DiscrepancyField& field, const std::vector<Mask>& masks, bool pooled) {
    const int levels = static_cast<int>(field.levels.size());
    const int groups = pooled ? 1 : levels;
    Partitioned p;
    p.batches.resize(groups);
    p.n_refs.resize(groups);
    p.s_refs.resize(groups);
    for (int l = 0; l < levels; ++l) {
        const Tensor& d = field.levels[l];
        const int g = pooled ? 0 : l;
        for (int n = 0; n < d.shape().n; ++n) {
            const Mask cells = partition_pixels(masks[n], d.shape().h, d.shape().w);
            const float* dp = d.item(n);
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (cells.data[c]) {
                    p.batches[g].d_s.push_back(dp[c]);
                    p.s_refs[g].push_back({l, n, c});
                } else {
                    p.batches[g].d_n.push_back(dp[c]);
                    p.n_refs[g].push_back({l, n, c});
                }
            }
        }
    }
    return p;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ExpertModel load_expert(const RunConfig& cfg) { return ExpertModel::load(cfg.backbone, cfg.hierarchies, cfg.weights_dir); }

ApprenticeModel apprentice_from(const Checkpoint& ckpt, const RunConfig& cfg) {
    ApprenticeModel a(cfg.backbone, cfg.hierarchies, cfg.seed);
    a.restore(ckpt.tensors);
    return a;
}

TrainResult train(const std::vector<Sample>& normals, const RunConfig& cfg, const TrainHooks& hooks) {
    return train(normals, cfg, load_expert(cfg), hooks);
}

TrainResult train(const std::vector<Sample>& normals, const RunConfig& cfg, const ExpertModel& expert,
                  const TrainHooks& hooks) {
    cfg.validate();
    if (normals.empty()) throw TrainingError("training set is empty");
    for (const auto& s : normals)
        if (s.label != Label::normal) throw TrainingError("training sample '" + s.id + "' is not normal");
    if (expert.taps() != cfg.hierarchies || expert.backbone() != cfg.backbone)
        throw TrainingError("expert does not match the configured backbone/hierarchies");

    const DatasetSpec spec = dataset_spec(cfg);
    std::vector<Tensor> images;
    images.reserve(normals.size());
    for (const auto& s : normals) images.push_back(preprocess(s, spec));

    ApprenticeModel apprentice(cfg.backbone, cfg.hierarchies, cfg.seed);
    AdamW opt(apprentice.state(), AdamWOptions{.lr = cfg.learning_rate, .weight_decay = cfg.weight_decay});

    TrainResult result;
    result.final_checkpoint = {0, apprentice.snapshot()};

    std::vector<int> order(images.size());
    const int n = static_cast<int>(images.size());
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = make_rng(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        std::vector<double> batch_mu_n, batch_mu_s, batch_loss;
        const std::size_t levels = cfg.hierarchies.size();
        std::vector<std::vector<double>> level_mu_n(levels), level_mu_s(levels);
        LossDiagnostics diag;
        int batch_index = 0;
        for (int start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const int end = std::min(n, start + cfg.batch_size);
            std::vector<Tensor> perturbed;
            std::vector<Mask> masks;
            for (int i = start; i < end; ++i) {
                const int idx = order[i];
                Rng rng = make_rng(cfg.seed, {kPerturbStream, static_cast<std::uint64_t>(epoch),
                                              static_cast<std::uint64_t>(idx)});
                PerturbationOutcome out = perturb(images[idx], cfg.perturbation, rng);
                if (hooks.on_perturb) hooks.on_perturb(epoch, idx, out);
                perturbed.push_back(std::move(out.image));
                masks.push_back(std::move(out.mask));
            }
            const Tensor batch = Tensor::stack(perturbed);

            const FeaturePyramid e_hat = normalize_features(expert.forward(batch));
            const FeaturePyramid a_raw = apprentice.forward_train(batch);
            const FeaturePyramid a_hat = normalize_features(a_raw);
            const DiscrepancyField field = discrepancy(e_hat, a_hat, cfg.discrepancy);
            const Partitioned parts = partition_field(field, masks, cfg.pool_hierarchies);

            DiscrepancyField grad_d;
            for (const auto& l : field.levels) grad_d.levels.emplace_back(l.shape());
            const double groups = static_cast<double>(parts.batches.size());
            double loss = 0.0;
            std::vector<double> all_n, all_s;
            for (std::size_t g = 0; g < parts.batches.size(); ++g) {
                const LossEvaluation ev =
                    evaluate_loss(cfg.loss_mode, parts.batches[g], cfg.gamma, cfg.weight_eps, &diag);
                loss += ev.value / groups;
                for (std::size_t i = 0; i < ev.grad_n.size(); ++i) {
                    const CellRef& r = parts.n_refs[g][i];
                    grad_d.levels[r.level].item(r.item)[r.cell] = static_cast<float>(ev.grad_n[i] / groups);
                }
                for (std::size_t j = 0; j < ev.grad_s.size(); ++j) {
                    const CellRef& r = parts.s_refs[g][j];
                    grad_d.levels[r.level].item(r.item)[r.cell] = static_cast<float>(ev.grad_s[j] / groups);
                }
                all_n.insert(all_n.end(), parts.batches[g].d_n.begin(), parts.batches[g].d_n.end());
                all_s.insert(all_s.end(), parts.batches[g].d_s.begin(), parts.batches[g].d_s.end());
            }
            if (!std::isfinite(loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
            }
            batch_loss.push_back(loss);
            batch_mu_n.push_back(mean_of(all_n));
            if (!all_s.empty()) batch_mu_s.push_back(mean_of(all_s));
            {
                std::vector<double> sum_n(levels, 0.0), sum_s(levels, 0.0), cnt_n(levels, 0.0), cnt_s(levels, 0.0);
                for (std::size_t g = 0; g < parts.batches.size(); ++g) {
                    for (std::size_t i = 0; i < parts.n_refs[g].size(); ++i) {
                        sum_n[parts.n_refs[g][i].level] += parts.batches[g].d_n[i];
                        cnt_n[parts.n_refs[g][i].level] += 1.0;
                    }
                    for (std::size_t j = 0; j < parts.s_refs[g].size(); ++j) {
                        sum_s[parts.s_refs[g][j].level] += parts.batches[g].d_s[j];
                        cnt_s[parts.s_refs[g][j].level] += 1.0;
                    }
                }
                for (std::size_t l = 0; l < levels; ++l) {
                    if (cnt_n[l] > 0) level_mu_n[l].push_back(sum_n[l] / cnt_n[l]);
                    if (cnt_s[l] > 0) level_mu_s[l].push_back(sum_s[l] / cnt_s[l]);
                }
            }

            apprentice.zero_grad();
            apprentice.backward(discrepancy_backward(a_raw, e_hat, a_hat, field, grad_d, cfg.discrepancy));
            opt.step();
        }

        EpochLog log;
        log.epoch = epoch;
        log.mu_n = mean_of(batch_mu_n);
        log.mu_s = mean_of(batch_mu_s);
        log.loss = mean_of(batch_loss);
        log.empty_synthetic_steps = diag.empty_synthetic;
        for (std::size_t l = 0; l < levels; ++l) {
            log.mu_n_level.push_back(mean_of(level_mu_n[l]));
            log.mu_s_level.push_back(mean_of(level_mu_s[l]));
        }
        log.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.logs.push_back(log);
        if (hooks.on_epoch) hooks.on_epoch(log);

        if (epoch > cfg.epochs - cfg.keep_last) result.epoch_checkpoints.push_back({epoch, apprentice.snapshot()});
    }
    if (cfg.epochs > 0) result.final_checkpoint = result.epoch_checkpoints.back();
    return result;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, const RunConfig& cfg) {
    Archive a;
    a.meta = {{"kind", "apprentice"},
              {"backbone", std::string(backbone_label(cfg.backbone))},
              {"hierarchies", cfg.hierarchies},
              {"resolution", cfg.resolution},
              {"epoch", ckpt.epoch},
              {"config", config_to_json(cfg)}};
    a.tensors = ckpt.tensors;
    save_archive(path, a);
}

std::pair<Checkpoint, RunConfig> load_checkpoint(const std::filesystem::path& path) {
    Archive a = load_archive(path);
    if (a.meta.value("kind", "") != "apprentice") throw ArchiveError(path.string() + " is not an apprentice checkpoint");
    RunConfig cfg = config_from_json(a.meta.at("config"));
    Checkpoint c{a.meta.at("epoch").get<int>(), std::move(a.tensors)};
    return {std::move(c), std::move(cfg)};
}

// ---------------------------------------------------------------------------

MetricStat summarize(std::span<const double> values) {
    MetricStat s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / n);
    return s;
}

MetricsReport aggregate(std::vector<EvalMetrics> per_checkpoint, int k) {
    if (k < 1) throw std::invalid_argument("aggregate: k must be >= 1");
    MetricsReport r;
    r.last_k = k;
    std::sort(per_checkpoint.begin(), per_checkpoint.end(),
              [](const EvalMetrics& a, const EvalMetrics& b) { return a.epoch < b.epoch; });
    if (static_cast<int>(per_checkpoint.size()) < k) r.insufficient_checkpoints = true;
    else per_checkpoint.erase(per_checkpoint.begin(), per_checkpoint.end() - k);
    r.per_checkpoint = std::move(per_checkpoint);
    auto column = [&](auto field) {
        std::vector<double> v;
        for (const auto& m : r.per_checkpoint) v.push_back(field(m));
        return summarize(v);
    };
    r.auroc = column([](const EvalMetrics& m) { return m.auroc; });
    r.aupro = column([](const EvalMetrics& m) { return m.aupro; });
    r.margin = column([](const EvalMetrics& m) { return m.dd.margin; });
    r.overlap = column([](const EvalMetrics& m) { return m.dd.overlap; });
    return r;
}

EvalMetrics evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<Sample>& test, const RunConfig& cfg,
                                const ExpertModel& expert, std::vector<AnomalyMap>* maps) {
    if (test.empty()) throw std::invalid_argument("evaluation set is empty");
    const ApprenticeModel apprentice = apprentice_from(ckpt, cfg);
    const DatasetSpec spec = dataset_spec(cfg);
    const ScoringOptions opt{cfg.discrepancy, cfg.eval.blur_sigma};

    ScoredSet set;
    set.reserve(test.size());
    for (std::size_t start = 0; start < test.size(); start += cfg.eval.batch_size) {
        const std::size_t end = std::min(test.size(), start + static_cast<std::size_t>(cfg.eval.batch_size));
        std::vector<Tensor> items;
        std::vector<std::string> ids;
        for (std::size_t i = start; i < end; ++i) {
            items.push_back(preprocess(test[i], spec));
            ids.push_back(test[i].id);
        }
        auto batch_maps = anomaly_maps(Tensor::stack(items), ids, expert, apprentice, cfg.hierarchies, opt);
        for (std::size_t i = start; i < end; ++i) {
            set.push_back({batch_maps[i - start].scores, preprocess_mask(test[i], spec)});
            if (maps) maps->push_back(std::move(batch_maps[i - start]));
        }
    }

    EvalMetrics m;
    m.epoch = ckpt.epoch;
    m.auroc = auroc_pixel(set);
    m.aupro = aupro(set, cfg.eval.fpr_limit);
    std::vector<double> dn, da;
    for (const auto& im : set)
        for (std::size_t i = 0; i < im.scores.size(); ++i) (im.mask.data[i] ? da : dn).push_back(im.scores.data[i]);
    m.dd = dd_stats(dn, da, cfg.eval.dd_bins);
    return m;
}

MetricsReport evaluate_last_k(const std::vector<Checkpoint>& checkpoints, const std::vector<Sample>& test,
                              const RunConfig& cfg, const ExpertModel& expert, int k) {
    if (checkpoints.empty()) throw std::invalid_argument("evaluate_last_k: no checkpoints");
    std::vector<const Checkpoint*> sorted;
    for (const auto& c : checkpoints) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->epoch < b->epoch; });
    if (static_cast<int>(sorted.size()) > k) sorted.erase(sorted.begin(), sorted.end() - k);

    std::vector<EvalMetrics> per;
    for (const Checkpoint* c : sorted) per.push_back(evaluate_checkpoint(*c, test, cfg, expert));
    MetricsReport r = aggregate(std::move(per), k);
    r.category = cfg.data.category;
    r.config_hash = config_hash(cfg);
    return r;
}

nlohmann::ordered_json report_to_json(const MetricsReport& r) {
    auto stat = [](const MetricStat& s) { return nlohmann::ordered_json{{"mean", s.mean}, {"std", s.std}}; };
    nlohmann::ordered_json j;
    j["category"] = r.category;
    j["config_hash"] = r.config_hash;
    j["last_k"] = r.last_k;
    j["insufficient_checkpoints"] = r.insufficient_checkpoints;
    j["auroc"] = stat(r.auroc);
    j["aupro"] = stat(r.aupro);
    j["margin"] = stat(r.margin);
    j["overlap"] = stat(r.overlap);
    j["per_checkpoint"] = nlohmann::ordered_json::array();
    for (const auto& m : r.per_checkpoint) {
        j["per_checkpoint"].push_back({{"epoch", m.epoch},
                                       {"auroc", m.auroc},
                                       {"aupro", m.aupro},
                                       {"mu_n", m.dd.mu_n},
                                       {"mu_a", m.dd.mu_a},
                                       {"margin", m.dd.margin},
                                       {"overlap", m.dd.overlap}});
    }
    return j;
}

}  // namespace cdo
