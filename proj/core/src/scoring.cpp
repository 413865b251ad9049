#include "cdo/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "cdo/image.hpp"

namespace cdo {

ScalarField combine_levels(const DiscrepancyField& field, int n, int out_h, int out_w,
                           std::span<const int> level_indices) {
    std::vector<int> all;
    if (level_indices.empty()) {
        for (int i = 0; i < static_cast<int>(field.levels.size()); ++i) all.push_back(i);
        level_indices = all;
    }
    ScalarField out(out_h, out_w, 0.0f);
    for (int li : level_indices) {
        if (li < 0 || li >= static_cast<int>(field.levels.size()))
            throw std::out_of_range("combine_levels: level " + std::to_string(li) + " does not exist");
        const Tensor& d = field.levels[li];
        ScalarField src(d.shape().h, d.shape().w);
        std::copy(d.item(n), d.item(n) + d.shape().plane(), src.data.begin());
        const ScalarField up = resize_bilinear(src, out_h, out_w);
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += up.data[i];
    }
    return out;
}

std::vector<AnomalyMap> anomaly_maps(const Tensor& batch, const std::vector<std::string>& ids,
                                     const ExpertModel& expert, const ApprenticeModel& apprentice,
                                     const std::vector<int>& hierarchies, const ScoringOptions& opt) {
    auto describe = [](const std::vector<int>& v) {
        std::string s = "[";
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s + "]";
    };
    if (hierarchies != expert.taps() || hierarchies != apprentice.taps()) {
        throw std::invalid_argument("scoring hierarchies " + describe(hierarchies) + " do not match the model taps " +
                                    describe(apprentice.taps()));
    }
    if (static_cast<int>(ids.size()) != batch.shape().n)
        throw std::invalid_argument("anomaly_maps: one id per batch item required");

    const FeaturePyramid e = normalize_features(expert.forward(batch));
    const FeaturePyramid a = normalize_features(apprentice.forward(batch));
    const DiscrepancyField field = discrepancy(e, a, opt.mode);

    std::vector<AnomalyMap> maps;
    for (int n = 0; n < batch.shape().n; ++n) {
        AnomalyMap m{combine_levels(field, n, batch.shape().h, batch.shape().w), ids[n]};
        if (opt.blur_sigma > 0.0) m.scores = gaussian_blur(m.scores, opt.blur_sigma);
        maps.push_back(std::move(m));
    }
    return maps;
}

AnomalyMap anomaly_map(const Tensor& image, const std::string& id, const ExpertModel& expert,
                       const ApprenticeModel& apprentice, const std::vector<int>& hierarchies,
                       const ScoringOptions& opt) {
    return anomaly_maps(image, {id}, expert, apprentice, hierarchies, opt).front();
}

double image_score(const AnomalyMap& map) {
    if (map.scores.data.empty()) return 0.0;
    return *std::max_element(map.scores.data.begin(), map.scores.data.end());
}

void save_heatmap(const std::filesystem::path& png_path, const AnomalyMap& map) {
    const auto [lo_it, hi_it] = std::minmax_element(map.scores.data.begin(), map.scores.data.end());
    const double lo = map.scores.data.empty() ? 0.0 : *lo_it;
    const double hi = map.scores.data.empty() ? 0.0 : *hi_it;
    Plane<std::uint16_t> q(map.scores.h, map.scores.w, 0);
    if (hi > lo) {
        for (std::size_t i = 0; i < q.size(); ++i)
            q.data[i] = static_cast<std::uint16_t>(std::lround((map.scores.data[i] - lo) / (hi - lo) * 65535.0));
    }
    write_gray16(png_path, q);
    nlohmann::ordered_json side{{"min", lo}, {"max", hi}, {"source_id", map.source_id}};
    auto json_path = png_path;
    json_path.replace_extension(".json");
    std::ofstream(json_path) << side.dump(2) << "\n";
}

AnomalyMap load_heatmap(const std::filesystem::path& png_path) {
    auto json_path = png_path;
    json_path.replace_extension(".json");
    std::ifstream in(json_path);
    if (!in) throw ImageIoError("missing heatmap sidecar " + json_path.string());
    const auto side = nlohmann::json::parse(in);
    const double lo = side.at("min").get<double>();
    const double hi = side.at("max").get<double>();
    const Plane<std::uint16_t> q = read_gray16(png_path);
    AnomalyMap m{ScalarField(q.h, q.w), side.at("source_id").get<std::string>()};
    for (std::size_t i = 0; i < q.size(); ++i)
        m.scores.data[i] = static_cast<float>(lo + (hi - lo) * q.data[i] / 65535.0);
    return m;
}

void save_map_csv(const std::filesystem::path& path, const AnomalyMap& map) {
    std::ofstream out(path);
    if (!out) throw ImageIoError("cannot write " + path.string());
    char buf[32];
    for (int y = 0; y < map.scores.h; ++y) {
        for (int x = 0; x < map.scores.w; ++x) {
            std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(map.scores(y, x)));
            out << (x ? "," : "") << buf;
        }
        out << "\n";
    }
}

}  // namespace cdo
