#include "cdo/cdo_loss.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>

namespace cdo {
namespace {

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double mean_or_zero(std::span<const double> v) { return v.empty() ? 0.0 : sum(v) / static_cast<double>(v.size()); }

void require_normals(std::span<const double> d_n) {
    if (d_n.empty()) throw LossError("loss needs at least one normal discrepancy");
}

void note_empty(LossDiagnostics* diag) {
    if (diag) ++diag->empty_synthetic;
}

}  // namespace

double baseline_loss(std::span<const double> d_n) {
    require_normals(d_n);
    return sum(d_n) / static_cast<double>(d_n.size());
}

double mom_loss(std::span<const double> d_n, std::span<const double> d_s, LossDiagnostics* diag) {
    require_normals(d_n);
    if (d_s.empty()) {
        note_empty(diag);
        return baseline_loss(d_n);
    }
    return (sum(d_n) - sum(d_s)) / static_cast<double>(d_n.size() + d_s.size());
}

WeightBatch oom_weights(std::span<const double> d_n, std::span<const double> d_s, double gamma, double eps) {
    if (!(gamma >= 0.0)) throw LossError("gamma must be >= 0");
    WeightBatch w;
    w.gamma = gamma;
    w.mu_n = std::max(mean_or_zero(d_n), eps);
    w.mu_s = std::max(mean_or_zero(d_s), eps);
    w.w_n.reserve(d_n.size());
    w.w_s.reserve(d_s.size());
    for (double d : d_n) w.w_n.push_back(std::max(std::pow(d / w.mu_n, gamma), eps));
    for (double d : d_s) w.w_s.push_back(std::pow(std::max(d, eps) / w.mu_s, -gamma));
    if (gamma == 0.0) {
        // pow(x, 0) is 1 for every x, but keep the identity independent of libm.
        std::fill(w.w_n.begin(), w.w_n.end(), 1.0);
        std::fill(w.w_s.begin(), w.w_s.end(), 1.0);
    }
    return w;
}

double cdo_loss(std::span<const double> d_n, std::span<const double> d_s, double gamma, double eps,
                LossDiagnostics* diag) {
    require_normals(d_n);
    if (d_s.empty()) {
        note_empty(diag);
        return baseline_loss(d_n);
    }
    const WeightBatch w = oom_weights(d_n, d_s, gamma, eps);
    // Same operation order as mom_loss, so unit weights reproduce it bit for bit.
    double sn = 0.0, ss = 0.0, wn = 0.0, ws = 0.0;
    for (std::size_t i = 0; i < d_n.size(); ++i) {
        sn += w.w_n[i] * d_n[i];
        wn += w.w_n[i];
    }
    for (std::size_t j = 0; j < d_s.size(); ++j) {
        ss += w.w_s[j] * d_s[j];
        ws += w.w_s[j];
    }
    return (sn - ss) / (wn + ws);
}

const char* to_string(LossMode m) {
    switch (m) {
        case LossMode::baseline: return "baseline";
        case LossMode::baseline_oom: return "baseline_oom";
        case LossMode::mom: return "mom";
        case LossMode::mom_oom: return "mom_oom";
    }
    return "?";
}

LossMode parse_loss_mode(std::string_view text) {
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "baseline" || t == "1") return LossMode::baseline;
    if (t == "baseline_oom" || t == "2") return LossMode::baseline_oom;
    if (t == "mom" || t == "3") return LossMode::mom;
    if (t == "mom_oom" || t == "cdo" || t == "4") return LossMode::mom_oom;
    throw LossError("unknown loss mode '" + std::string(text) + "' (expected baseline, baseline_oom, mom, mom_oom)");
}

LossEvaluation evaluate_loss(LossMode mode, const DDBatch& batch, double gamma, double eps, LossDiagnostics* diag) {
    const auto& dn = batch.d_n;
    const auto& ds = batch.d_s;
    require_normals(dn);
    LossEvaluation out;
    out.mu_n = mean_or_zero(dn);
    out.mu_s = mean_or_zero(ds);
    out.grad_n.assign(dn.size(), 0.0);
    out.grad_s.assign(ds.size(), 0.0);

    const bool margin = mode == LossMode::mom || mode == LossMode::mom_oom;
    if (margin && ds.empty()) note_empty(diag);
    const bool use_s = margin && !ds.empty();
    const bool weighted = (mode == LossMode::baseline_oom || mode == LossMode::mom_oom) && (use_s || !margin);

    if (!weighted) {
        const double n = static_cast<double>(dn.size() + (use_s ? ds.size() : 0));
        out.value = (sum(dn) - (use_s ? sum(ds) : 0.0)) / n;
        std::fill(out.grad_n.begin(), out.grad_n.end(), 1.0 / n);
        if (use_s) std::fill(out.grad_s.begin(), out.grad_s.end(), -1.0 / n);
        return out;
    }

    const WeightBatch w = oom_weights(dn, use_s ? std::span<const double>(ds) : std::span<const double>{}, gamma, eps);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < dn.size(); ++i) {
        num += w.w_n[i] * dn[i];
        den += w.w_n[i];
    }
    for (std::size_t j = 0; j < w.w_s.size(); ++j) {
        num -= w.w_s[j] * ds[j];
        den += w.w_s[j];
    }
    out.value = num / den;
    for (std::size_t i = 0; i < dn.size(); ++i) out.grad_n[i] = w.w_n[i] / den;
    for (std::size_t j = 0; j < w.w_s.size(); ++j) out.grad_s[j] = -w.w_s[j] / den;
    return out;
}

}  // namespace cdo
