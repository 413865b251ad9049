#include "cdo/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

namespace cdo {
namespace {

using nlohmann::json;

const char* type_of(const json& v) {
    if (v.is_null()) return "null";
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    return "object";
}

// Reads the keys of one JSON object, remembering which were consumed.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "object", j_);
    }

    void integer(const char* key, int& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) fail(name(key), "integer", *v);
            out = v->get<int>();
        }
    }
    void seed(const char* key, std::uint64_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
                fail(name(key), "non-negative integer", *v);
            out = v->get<std::uint64_t>();
        }
    }
    void real(const char* key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) fail(name(key), "number", *v);
            out = v->get<double>();
        }
    }
    void boolean(const char* key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) fail(name(key), "boolean", *v);
            out = v->get<bool>();
        }
    }
    const json* string(const char* key) {
        const json* v = take(key);
        if (v && !v->is_string()) fail(name(key), "string", *v);
        return v;
    }
    void integers(const char* key, std::vector<int>& out, std::size_t exact = 0) {
        if (const json* v = take(key)) {
            const std::string expected =
                exact ? "array of " + std::to_string(exact) + " integers" : std::string("array of integers");
            if (!v->is_array() || (exact && v->size() != exact)) fail(name(key), expected, *v);
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number_integer()) fail(name(key), expected, *v);
                out.push_back(e.get<int>());
            }
        }
    }
    void reals(const char* key, double& lo, double& hi) {
        if (const json* v = take(key)) {
            if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
                fail(name(key), "array of 2 numbers", *v);
            lo = (*v)[0].get<double>();
            hi = (*v)[1].get<double>();
        }
    }
    const json* object(const char* key) {
        const json* v = take(key);
        if (v && !v->is_object()) fail(name(key), "object", *v);
        return v;
    }
    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    // Rejects keys nobody asked for.
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("config field '" + name(k.c_str()) + "': unknown field");
    }

    [[noreturn]] static void fail(const std::string& field, const std::string& expected, const json& got) {
        throw ConfigError("config field '" + field + "': expected " + expected + ", got " + type_of(got));
    }

private:
    const json* take(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename F>
auto parse_enum(const std::string& field, const json* v, F parse) {
    try {
        return parse(v->get<std::string>());
    } catch (const std::exception& e) {
        throw ConfigError("config field '" + field + "': " + e.what());
    }
}

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
}

}  // namespace

void RunConfig::validate() const {
    if (resolution < 32) invalid("resolution", "must be >= 32");
    if (hierarchies.empty()) invalid("hierarchies", "must not be empty");
    const int max_h = backbone == BackboneId::toy ? 3 : 4;
    for (std::size_t i = 0; i < hierarchies.size(); ++i) {
        if (hierarchies[i] < 0 || hierarchies[i] > max_h)
            invalid("hierarchies", "index " + std::to_string(hierarchies[i]) + " outside [0, " + std::to_string(max_h) +
                                       "] for " + std::string(backbone_label(backbone)));
        if (i && hierarchies[i] <= hierarchies[i - 1]) invalid("hierarchies", "must be strictly increasing");
    }
    if (!(gamma >= 0.0)) invalid("gamma", "must be >= 0");
    if (epochs < 0) invalid("epochs", "must be >= 0");
    if (batch_size < 1) invalid("batch_size", "must be >= 1");
    if (!(learning_rate > 0.0)) invalid("learning_rate", "must be > 0");
    if (!(weight_decay >= 0.0)) invalid("weight_decay", "must be >= 0");
    if (!(weight_eps > 0.0)) invalid("weight_eps", "must be > 0");
    if (keep_last < 1) invalid("keep_last", "must be >= 1");
    try {
        perturbation.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config field 'perturbation': ") + e.what());
    }
    if (data.kind == DataKind::mvtec && data.category.empty()) invalid("data.category", "must not be empty");
    if (data.toy.n_train < 0 || data.toy.n_test_normal < 0 || data.toy.n_test_abnormal < 0)
        invalid("data.toy", "counts must be >= 0");
    if (eval.last_k < 1) invalid("eval.last_k", "must be >= 1");
    if (!(eval.fpr_limit > 0.0 && eval.fpr_limit <= 1.0)) invalid("eval.fpr_limit", "must lie in (0, 1]");
    if (!(eval.blur_sigma >= 0.0)) invalid("eval.blur_sigma", "must be >= 0");
    if (eval.batch_size < 1) invalid("eval.batch_size", "must be >= 1");
    if (eval.dd_bins < 1) invalid("eval.dd_bins", "must be >= 1");
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    Reader r(j, "");
    if (const json* v = r.string("backbone")) c.backbone = parse_enum("backbone", v, parse_backbone);
    r.integer("resolution", c.resolution);
    r.integers("hierarchies", c.hierarchies);
    r.real("gamma", c.gamma);
    r.integer("epochs", c.epochs);
    r.integer("batch_size", c.batch_size);
    r.real("learning_rate", c.learning_rate);
    r.real("weight_decay", c.weight_decay);
    r.seed("seed", c.seed);
    if (const json* v = r.string("loss_mode")) c.loss_mode = parse_enum("loss_mode", v, parse_loss_mode);
    if (const json* v = r.string("discrepancy")) {
        c.discrepancy = parse_enum("discrepancy", v, [](const std::string& s) {
            if (s == "squared") return DiscrepancyMode::squared;
            if (s == "euclidean") return DiscrepancyMode::euclidean;
            throw std::invalid_argument("expected 'squared' or 'euclidean', got '" + s + "'");
        });
    }
    r.boolean("pool_hierarchies", c.pool_hierarchies);
    r.real("weight_eps", c.weight_eps);
    r.integer("keep_last", c.keep_last);
    if (const json* v = r.string("weights_dir")) c.weights_dir = v->get<std::string>();

    if (const json* v = r.object("perturbation")) {
        Reader p(*v, "perturbation");
        std::vector<int> counts{c.perturbation.min_squares, c.perturbation.max_squares};
        p.integers("num_squares", counts, 2);
        c.perturbation.min_squares = counts[0];
        c.perturbation.max_squares = counts[1];
        p.reals("side_fraction", c.perturbation.min_side_fraction, c.perturbation.max_side_fraction);
        p.real("fill_mean", c.perturbation.fill_mean);
        p.real("fill_std", c.perturbation.fill_std);
        p.finish();
    }
    if (const json* v = r.object("data")) {
        Reader d(*v, "data");
        if (const json* k = d.string("kind")) {
            c.data.kind = parse_enum("data.kind", k, [](const std::string& s) {
                if (s == "toy") return DataKind::toy;
                if (s == "mvtec") return DataKind::mvtec;
                throw std::invalid_argument("expected 'toy' or 'mvtec', got '" + s + "'");
            });
        }
        if (const json* s = d.string("root")) c.data.root = s->get<std::string>();
        if (const json* s = d.string("category")) c.data.category = s->get<std::string>();
        if (const json* t = d.object("toy")) {
            Reader tr(*t, "data.toy");
            tr.seed("seed", c.data.toy.seed);
            tr.integer("n_train", c.data.toy.n_train);
            tr.integer("n_test_normal", c.data.toy.n_test_normal);
            tr.integer("n_test_abnormal", c.data.toy.n_test_abnormal);
            tr.finish();
        }
        d.finish();
    }
    if (const json* v = r.object("eval")) {
        Reader e(*v, "eval");
        e.integer("last_k", c.eval.last_k);
        e.real("fpr_limit", c.eval.fpr_limit);
        e.real("blur_sigma", c.eval.blur_sigma);
        e.integer("batch_size", c.eval.batch_size);
        e.integer("dd_bins", c.eval.dd_bins);
        e.finish();
    }
    r.finish();
    c.perturbation.seed = c.seed;
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["backbone"] = std::string(backbone_label(c.backbone));
    j["resolution"] = c.resolution;
    j["hierarchies"] = c.hierarchies;
    j["gamma"] = c.gamma;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["weight_decay"] = c.weight_decay;
    j["seed"] = c.seed;
    j["loss_mode"] = to_string(c.loss_mode);
    j["discrepancy"] = c.discrepancy == DiscrepancyMode::squared ? "squared" : "euclidean";
    j["pool_hierarchies"] = c.pool_hierarchies;
    j["weight_eps"] = c.weight_eps;
    j["keep_last"] = c.keep_last;
    j["weights_dir"] = c.weights_dir.string();
    j["perturbation"] = {
        {"num_squares", {c.perturbation.min_squares, c.perturbation.max_squares}},
        {"side_fraction", {c.perturbation.min_side_fraction, c.perturbation.max_side_fraction}},
        {"fill_mean", c.perturbation.fill_mean},
        {"fill_std", c.perturbation.fill_std},
    };
    nlohmann::ordered_json data;
    data["kind"] = c.data.kind == DataKind::toy ? "toy" : "mvtec";
    data["root"] = c.data.root.string();
    data["category"] = c.data.category;
    data["toy"] = {{"seed", c.data.toy.seed},
                   {"n_train", c.data.toy.n_train},
                   {"n_test_normal", c.data.toy.n_test_normal},
                   {"n_test_abnormal", c.data.toy.n_test_abnormal}};
    j["data"] = data;
    j["eval"] = {{"last_k", c.eval.last_k},
                 {"fpr_limit", c.eval.fpr_limit},
                 {"blur_sigma", c.eval.blur_sigma},
                 {"batch_size", c.eval.batch_size},
                 {"dd_bins", c.eval.dd_bins}};
    return j;
}

std::string config_hash(const RunConfig& cfg) {
    const std::string text = config_to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DatasetSpec dataset_spec(const RunConfig& cfg) {
    DatasetSpec s;
    s.root = cfg.data.root;
    if (s.root.empty())
        if (const char* env = std::getenv("CDO_DATA_ROOT")) s.root = env;
    s.category = cfg.data.category;
    s.resolution = cfg.resolution;
    return s;
}

std::vector<Sample> load_dataset(const RunConfig& cfg) {
    if (cfg.data.kind == DataKind::toy) {
        ToyDatasetOptions opt = cfg.data.toy;
        opt.resolution = cfg.resolution;
        return generate_toy_dataset(opt);
    }
    const DatasetSpec spec = dataset_spec(cfg);
    if (spec.root.empty()) throw ConfigError("config field 'data.root': empty and CDO_DATA_ROOT is not set");
    auto samples = load_mvtec_category(spec, Split::train);
    auto test = load_mvtec_category(spec, Split::test);
    samples.insert(samples.end(), std::make_move_iterator(test.begin()), std::make_move_iterator(test.end()));
    return samples;
}

}  // namespace cdo
