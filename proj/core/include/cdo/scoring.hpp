#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cdo/features.hpp"

namespace cdo {

// Per-pixel anomaly scores g(p) at input resolution.
struct AnomalyMap {
    ScalarField scores;
    std::string source_id;
};

struct ScoringOptions {
    DiscrepancyMode mode = DiscrepancyMode::squared;
    double blur_sigma = 0.0;  // 0 disables smoothing
};

// Bilinearly upsamples the selected levels of item `n` to out_h×out_w and sums them.
// An empty selection means every level.
ScalarField combine_levels(const DiscrepancyField& field, int n, int out_h, int out_w,
                           std::span<const int> level_indices = {});

// Maps for every image of an N×3×R×R batch. `hierarchies` must equal the taps of both models.
std::vector<AnomalyMap> anomaly_maps(const Tensor& batch, const std::vector<std::string>& ids,
                                     const ExpertModel& expert, const ApprenticeModel& apprentice,
                                     const std::vector<int>& hierarchies, const ScoringOptions& opt = {});

AnomalyMap anomaly_map(const Tensor& image, const std::string& id, const ExpertModel& expert,
                       const ApprenticeModel& apprentice, const std::vector<int>& hierarchies,
                       const ScoringOptions& opt = {});

// Maximum of the map.
double image_score(const AnomalyMap& map);

// 16-bit PNG scaled over [min, max] plus a JSON sidecar {min, max, source_id} next to it
// (same stem, .json extension).
void save_heatmap(const std::filesystem::path& png_path, const AnomalyMap& map);
// Inverse of save_heatmap up to 16-bit quantisation.
AnomalyMap load_heatmap(const std::filesystem::path& png_path);
// Raw scores as comma-separated rows with 9 significant digits.
void save_map_csv(const std::filesystem::path& path, const AnomalyMap& map);

}  // namespace cdo
