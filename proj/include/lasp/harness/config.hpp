#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lasp/boundary.hpp"
#include "lasp/data.hpp"
#include "lasp/error.hpp"
#include "lasp/losses.hpp"
#include "lasp/model.hpp"
#include "lasp/saliency.hpp"

namespace lasp {

using Json = nlohmann::json;

enum class Method { finetune, ird, sd, gm, sd_gm };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::finetune:
            return "finetune";
        case Method::ird:
            return "ird";
        case Method::sd:
            return "sd";
        case Method::gm:
            return "gm";
        case Method::sd_gm:
            return "sd_gm";
    }
    return "?";
}

inline bool uses_distillation(Method m) { return m != Method::finetune; }
inline bool uses_selective_distillation(Method m) { return m == Method::sd || m == Method::sd_gm; }
inline bool uses_modulation(Method m) { return m == Method::gm || m == Method::sd_gm; }
inline bool uses_mask(Method m) { return m != Method::finetune && m != Method::ird; }

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::task_incremental:
            return "task_incremental";
        case Scenario::class_incremental:
            return "class_incremental";
        case Scenario::domain_incremental:
            return "domain_incremental";
    }
    return "?";
}

enum class BoundaryMode { oracle, detector };
enum class ModulateScope { total, contrastive };

struct DatasetSpec {
    std::string kind = "synthetic";  // synthetic | idx | csv
    // synthetic
    std::size_t classes = 10;
    std::size_t dim = 32;
    double separation = 4.0;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 100;
    // idx
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    // csv
    std::string train_csv;
    std::string test_csv;
    bool csv_header = false;
    std::size_t image_side = 0;
    // cap per class after loading (0 = keep all)
    std::size_t max_train_per_class = 0;
    std::size_t max_test_per_class = 0;
};

struct ProbeConfig {
    std::size_t epochs = 200;
    double step = 0.1;
    bool balanced = true;  // weight the loss so every class carries equal mass
};

struct SubsetAnalysisConfig {
    bool enabled = false;
    std::size_t k = 10;
    std::size_t n = 100;
    std::size_t max_boundaries = 0;  // 0 = every boundary
};

struct RunConfig {
    DatasetSpec dataset;
    Scenario scenario = Scenario::class_incremental;
    std::size_t n_tasks = 5;
    ModelConfig model;  // input_dim is taken from the data
    SupConConfig supcon;
    IRDConfig ird;
    double distill_weight = 1.0;
    DsrsSetting dsrs = DsrsSetting::onlycurrent;
    MaskTrainConfig mask{8, 100, 2.0, 0.001, 0.5, 0.5, SelectionRule::keep_above, AlignmentSign::maximize};
    SalienceSource salience_source = SalienceSource::thresholded_uniform;
    ModulateScope modulate_scope = ModulateScope::total;
    BoundaryMode boundary_mode = BoundaryMode::oracle;
    BoundaryDetectorConfig detector;
    std::size_t memory_capacity = 200;
    double memory_fraction = 0.5;
    Method method = Method::sd;
    std::size_t epochs_per_task = 20;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    AugmentConfig augment;
    ProbeConfig probe;
    SubsetAnalysisConfig subsets;
    bool force_full_mask = false;
    bool force_zero_salience = false;
    std::size_t seeds = 1;  // replication count for sweeps

    void validate() const {
        if (n_tasks < 1) {
            throw ConfigError("n_tasks must be >= 1");
        }
        if (supcon.tau <= 0.0 || ird.eta1 <= 0.0 || ird.eta2 <= 0.0) {
            throw ConfigError("temperatures must be > 0");
        }
        if (distill_weight < 0.0) {
            throw ConfigError("distill_weight must be >= 0");
        }
        if (batch_size < 2) {
            throw ConfigError("batch_size must be >= 2");
        }
        if (!(memory_fraction >= 0.0 && memory_fraction < 1.0)) {
            throw ConfigError("memory_fraction must lie in [0, 1)");
        }
        if (learning_rate <= 0.0 || momentum < 0.0 || momentum >= 1.0) {
            throw ConfigError("learning_rate must be > 0 and momentum in [0, 1)");
        }
        if (epochs_per_task < 1) {
            throw ConfigError("epochs_per_task must be >= 1");
        }
        if (dataset.kind != "synthetic" && dataset.kind != "idx" && dataset.kind != "csv") {
            throw ConfigError("dataset.kind must be synthetic, idx or csv");
        }
        if (probe.epochs < 1 || probe.step <= 0.0) {
            throw ConfigError("probe needs epochs >= 1 and step > 0");
        }
        if (seeds < 1) {
            throw ConfigError("seeds must be >= 1");
        }
        mask.validate();
        detector.validate();
        augment.validate();
        ModelConfig m = model;
        m.input_dim = 1;
        m.validate();
        if (subsets.enabled && subsets.k >= model.embedding_dim) {
            throw ConfigError("subset size k must be < embedding_dim");
        }
    }
};

// --- JSON mapping -----------------------------------------------------------

namespace detail {

// Reads an object and rejects any key it was not asked about.
class StrictObject {
public:
    StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(path_ + ": expected an object");
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (auto it = j_.find(key); it != j_.end()) {
            try {
                out = it->template get<T>();
            } catch (const Json::exception& e) {
                throw ConfigError(path_ + "." + key + ": " + e.what());
            }
        }
    }

    [[nodiscard]] const Json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <typename E>
    void get_enum(const char* key, E& out, const std::vector<std::pair<const char*, E>>& names) {
        std::string s;
        bool present = j_.contains(key);
        get(key, s);
        if (!present) {
            return;
        }
        for (const auto& [name, value] : names) {
            if (s == name) {
                out = value;
                return;
            }
        }
        std::string allowed;
        for (const auto& [name, value] : names) {
            allowed += std::string(allowed.empty() ? "" : ", ") + name;
        }
        throw ConfigError(path_ + "." + key + ": unknown value '" + s + "' (allowed: " + allowed + ")");
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (seen_.count(key) == 0) {
                throw ConfigError(path_ + ": unknown key '" + key + "'");
            }
        }
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline const std::vector<std::pair<const char*, Method>> kMethodNames{
    {"finetune", Method::finetune}, {"ird", Method::ird}, {"sd", Method::sd}, {"gm", Method::gm}, {"sd_gm", Method::sd_gm}};
inline const std::vector<std::pair<const char*, DsrsSetting>> kDsrsNames{
    {"onlypast", DsrsSetting::onlypast}, {"onlycurrent", DsrsSetting::onlycurrent}, {"combined", DsrsSetting::combined}};
inline const std::vector<std::pair<const char*, Scenario>> kScenarioNames{
    {"task_incremental", Scenario::task_incremental},
    {"class_incremental", Scenario::class_incremental},
    {"domain_incremental", Scenario::domain_incremental}};
inline const std::vector<std::pair<const char*, SelectionRule>> kRuleNames{{"keep_above", SelectionRule::keep_above},
                                                                           {"keep_below", SelectionRule::keep_below}};
inline const std::vector<std::pair<const char*, AlignmentSign>> kSignNames{
    {"maximize", AlignmentSign::maximize}, {"as_displayed", AlignmentSign::as_displayed}};
inline const std::vector<std::pair<const char*, SalienceSource>> kSourceNames{
    {"thresholded_uniform", SalienceSource::thresholded_uniform}, {"mask_weighted", SalienceSource::mask_weighted}};
inline const std::vector<std::pair<const char*, ModulateScope>> kScopeNames{{"total", ModulateScope::total},
                                                                            {"contrastive", ModulateScope::contrastive}};
inline const std::vector<std::pair<const char*, BoundaryMode>> kBoundaryNames{{"oracle", BoundaryMode::oracle},
                                                                              {"detector", BoundaryMode::detector}};

template <typename E>
const char* name_of(E value, const std::vector<std::pair<const char*, E>>& names) {
    for (const auto& [name, v] : names) {
        if (v == value) {
            return name;
        }
    }
    return "?";
}

}  // namespace detail

inline Method parse_method(const std::string& s) {
    for (const auto& [name, v] : detail::kMethodNames) {
        if (s == name) {
            return v;
        }
    }
    throw ConfigError("unknown method '" + s + "'");
}

inline DsrsSetting parse_dsrs(const std::string& s) {
    for (const auto& [name, v] : detail::kDsrsNames) {
        if (s == name) {
            return v;
        }
    }
    throw ConfigError("unknown D_SRS setting '" + s + "'");
}

inline RunConfig run_config_from_json(const Json& j) {
    using detail::StrictObject;
    RunConfig c;
    StrictObject top(j, "config");
    if (const Json* d = top.child("dataset")) {
        StrictObject o(*d, "config.dataset");
        auto& s = c.dataset;
        o.get("kind", s.kind);
        o.get("classes", s.classes);
        o.get("dim", s.dim);
        o.get("separation", s.separation);
        o.get("train_per_class", s.train_per_class);
        o.get("test_per_class", s.test_per_class);
        o.get("train_images", s.train_images);
        o.get("train_labels", s.train_labels);
        o.get("test_images", s.test_images);
        o.get("test_labels", s.test_labels);
        o.get("train_csv", s.train_csv);
        o.get("test_csv", s.test_csv);
        o.get("csv_header", s.csv_header);
        o.get("image_side", s.image_side);
        o.get("max_train_per_class", s.max_train_per_class);
        o.get("max_test_per_class", s.max_test_per_class);
        o.finish();
    }
    top.get_enum("scenario", c.scenario, detail::kScenarioNames);
    top.get("n_tasks", c.n_tasks);
    if (const Json* m = top.child("model")) {
        StrictObject o(*m, "config.model");
        o.get("encoder_widths", c.model.encoder_widths);
        o.get("representation_dim", c.model.representation_dim);
        o.get("projection_hidden", c.model.projection_hidden);
        o.get("embedding_dim", c.model.embedding_dim);
        o.finish();
    }
    top.get("supcon_tau", c.supcon.tau);
    top.get("ird_eta1", c.ird.eta1);
    top.get("ird_eta2", c.ird.eta2);
    top.get("distill_weight", c.distill_weight);
    top.get_enum("dsrs", c.dsrs, detail::kDsrsNames);
    if (const Json* m = top.child("mask")) {
        StrictObject o(*m, "config.mask");
        o.get("restarts", c.mask.restarts);
        o.get("epochs", c.mask.epochs);
        o.get("step_size", c.mask.step_size);
        o.get("lambda", c.mask.lambda);
        o.get("threshold", c.mask.threshold);
        o.get("init_scale", c.mask.init_scale);
        o.get_enum("rule", c.mask.rule, detail::kRuleNames);
        o.get_enum("sign", c.mask.sign, detail::kSignNames);
        o.finish();
    }
    top.get_enum("salience_source", c.salience_source, detail::kSourceNames);
    top.get_enum("modulate_scope", c.modulate_scope, detail::kScopeNames);
    if (const Json* b = top.child("boundary")) {
        StrictObject o(*b, "config.boundary");
        o.get_enum("mode", c.boundary_mode, detail::kBoundaryNames);
        o.get("window", c.detector.window);
        o.get("drop_ratio", c.detector.drop_ratio);
        o.finish();
    }
    top.get("memory_capacity", c.memory_capacity);
    top.get("memory_fraction", c.memory_fraction);
    top.get_enum("method", c.method, detail::kMethodNames);
    top.get("epochs_per_task", c.epochs_per_task);
    top.get("batch_size", c.batch_size);
    top.get("learning_rate", c.learning_rate);
    top.get("momentum", c.momentum);
    top.get("seed", c.seed);
    if (const Json* a = top.child("augment")) {
        StrictObject o(*a, "config.augment");
        o.get("noise_sigma", c.augment.noise_sigma);
        o.get("scale_lo", c.augment.scale_lo);
        o.get("scale_hi", c.augment.scale_hi);
        o.get("crop_pad", c.augment.crop_pad);
        o.get("flip_prob", c.augment.flip_prob);
        o.finish();
    }
    if (const Json* p = top.child("probe")) {
        StrictObject o(*p, "config.probe");
        o.get("epochs", c.probe.epochs);
        o.get("step", c.probe.step);
        o.get("balanced", c.probe.balanced);
        o.finish();
    }
    if (const Json* s = top.child("subset_analysis")) {
        StrictObject o(*s, "config.subset_analysis");
        o.get("enabled", c.subsets.enabled);
        o.get("k", c.subsets.k);
        o.get("n", c.subsets.n);
        o.get("max_boundaries", c.subsets.max_boundaries);
        o.finish();
    }
    top.get("force_full_mask", c.force_full_mask);
    top.get("force_zero_salience", c.force_zero_salience);
    top.get("seeds", c.seeds);
    top.finish();
    c.validate();
    return c;
}

inline RunConfig run_config_from_string(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return run_config_from_json(j);
}

inline RunConfig load_run_config(const std::string& path) {
    const auto bytes = io::read_file(path);
    return run_config_from_string(std::string(bytes.begin(), bytes.end()));
}

inline Json to_json(const RunConfig& c) {
    using detail::name_of;
    const auto& d = c.dataset;
    return Json{
        {"dataset",
         {{"kind", d.kind},
          {"classes", d.classes},
          {"dim", d.dim},
          {"separation", d.separation},
          {"train_per_class", d.train_per_class},
          {"test_per_class", d.test_per_class},
          {"train_images", d.train_images},
          {"train_labels", d.train_labels},
          {"test_images", d.test_images},
          {"test_labels", d.test_labels},
          {"train_csv", d.train_csv},
          {"test_csv", d.test_csv},
          {"csv_header", d.csv_header},
          {"image_side", d.image_side},
          {"max_train_per_class", d.max_train_per_class},
          {"max_test_per_class", d.max_test_per_class}}},
        {"scenario", name_of(c.scenario, detail::kScenarioNames)},
        {"n_tasks", c.n_tasks},
        {"model",
         {{"encoder_widths", c.model.encoder_widths},
          {"representation_dim", c.model.representation_dim},
          {"projection_hidden", c.model.projection_hidden},
          {"embedding_dim", c.model.embedding_dim}}},
        {"supcon_tau", c.supcon.tau},
        {"ird_eta1", c.ird.eta1},
        {"ird_eta2", c.ird.eta2},
        {"distill_weight", c.distill_weight},
        {"dsrs", name_of(c.dsrs, detail::kDsrsNames)},
        {"mask",
         {{"restarts", c.mask.restarts},
          {"epochs", c.mask.epochs},
          {"step_size", c.mask.step_size},
          {"lambda", c.mask.lambda},
          {"threshold", c.mask.threshold},
          {"init_scale", c.mask.init_scale},
          {"rule", name_of(c.mask.rule, detail::kRuleNames)},
          {"sign", name_of(c.mask.sign, detail::kSignNames)}}},
        {"salience_source", name_of(c.salience_source, detail::kSourceNames)},
        {"modulate_scope", name_of(c.modulate_scope, detail::kScopeNames)},
        {"boundary",
         {{"mode", name_of(c.boundary_mode, detail::kBoundaryNames)},
          {"window", c.detector.window},
          {"drop_ratio", c.detector.drop_ratio}}},
        {"memory_capacity", c.memory_capacity},
        {"memory_fraction", c.memory_fraction},
        {"method", name_of(c.method, detail::kMethodNames)},
        {"epochs_per_task", c.epochs_per_task},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"momentum", c.momentum},
        {"seed", c.seed},
        {"augment",
         {{"noise_sigma", c.augment.noise_sigma},
          {"scale_lo", c.augment.scale_lo},
          {"scale_hi", c.augment.scale_hi},
          {"crop_pad", c.augment.crop_pad},
          {"flip_prob", c.augment.flip_prob}}},
        {"probe", {{"epochs", c.probe.epochs}, {"step", c.probe.step}, {"balanced", c.probe.balanced}}},
        {"subset_analysis",
         {{"enabled", c.subsets.enabled},
          {"k", c.subsets.k},
          {"n", c.subsets.n},
          {"max_boundaries", c.subsets.max_boundaries}}},
        {"force_full_mask", c.force_full_mask},
        {"force_zero_salience", c.force_zero_salience},
        {"seeds", c.seeds},
    };
}

}  // namespace lasp
