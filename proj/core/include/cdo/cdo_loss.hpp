#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace cdo {

// Normal and synthetic-abnormal discrepancies pooled over hierarchies and batch images.
struct DDBatch {
    std::vector<double> d_n;
    std::vector<double> d_s;
};

struct WeightBatch {
    std::vector<double> w_n;
    std::vector<double> w_s;
    double gamma = 0.0;
    double mu_n = 0.0;  // guarded means the weights were computed from
    double mu_s = 0.0;
};

inline constexpr double kDefaultGamma = 2.0;
inline constexpr double kWeightEps = 1e-6;

class LossError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Counts degenerate steps: a margin-type loss asked for with no synthetic cells.
struct LossDiagnostics {
    std::size_t empty_synthetic = 0;
};

// Mean of d_n. Throws LossError on an empty set.
double baseline_loss(std::span<const double> d_n);

// (sum d_n - sum d_s) / (N_n + N_s). With N_s = 0 this returns baseline_loss(d_n) and bumps
// diag->empty_synthetic.
double mom_loss(std::span<const double> d_n, std::span<const double> d_s, LossDiagnostics* diag = nullptr);

// w_n = max((d_n / mu_n)^gamma, eps), w_s = (max(d_s, eps) / mu_s)^-gamma with both means
// floored at eps. gamma = 0 yields unit weights exactly.
WeightBatch oom_weights(std::span<const double> d_n, std::span<const double> d_s, double gamma,
                        double eps = kWeightEps);

// (sum w_n d_n - sum w_s d_s) / (sum w_n + sum w_s); same N_s = 0 fallback as mom_loss.
double cdo_loss(std::span<const double> d_n, std::span<const double> d_s, double gamma, double eps = kWeightEps,
                LossDiagnostics* diag = nullptr);

enum class LossMode {
    baseline,      // mean of d_n
    baseline_oom,  // sum w_n d_n / sum w_n; synthetic cells only feed the logged mu_s
    mom,
    mom_oom,
};

const char* to_string(LossMode m);
// Accepts the names above or the case numbers "1".."4".
LossMode parse_loss_mode(std::string_view text);

struct LossEvaluation {
    double value = 0.0;
    // dL/dd per entry with the weights held constant.
    std::vector<double> grad_n;
    std::vector<double> grad_s;
    double mu_n = 0.0;  // plain means of the inputs, for logging
    double mu_s = 0.0;
};

LossEvaluation evaluate_loss(LossMode mode, const DDBatch& batch, double gamma, double eps = kWeightEps,
                             LossDiagnostics* diag = nullptr);

}  // namespace cdo
