#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lasp/harness/config.hpp"
#include "lasp/harness/metrics.hpp"
#include "lasp/harness/probe.hpp"
#include "lasp/harness/subsets.hpp"
#include "lasp/harness/trainer.hpp"
#include "lasp/memory.hpp"
#include "lasp/model.hpp"

namespace lasp {

// --- Checkpoint -------------------------------------------------------------
//
// The parameter file with three extra sections: "CONF" (run config JSON),
// "BUFR" (serialized replay buffer) and "META" (JSON: tasks_seen, seed,
// method, parameter hash).

struct Checkpoint {
    Model model;
    ReplayBuffer memory;
    std::optional<RunConfig> config;
    nlohmann::json meta = nlohmann::json::object();
};

inline std::vector<std::uint8_t> to_bytes(const std::string& s) { return {s.begin(), s.end()}; }

inline void save_checkpoint(const std::string& path, const TrainResult& r) {
    nlohmann::json meta{{"tasks_seen", r.record.accuracy.empty() ? 0 : r.record.accuracy.back().size()},
                        {"seed", r.config.seed},
                        {"method", to_string(r.config.method)},
                        {"parameter_hash", r.model.parameter_hash()}};
    save_params(r.model, path,
                {{"CONF", to_bytes(to_json(r.config).dump())},
                 {"BUFR", r.memory.serialize()},
                 {"META", to_bytes(meta.dump())}});
}

inline Checkpoint load_checkpoint(const std::string& path) {
    auto loaded = load_params_with_sections(path);
    Checkpoint c;
    c.model = std::move(loaded.model);
    if (const auto* buf = loaded.find("BUFR")) {
        c.memory = ReplayBuffer::deserialize(buf->payload);
    }
    if (const auto* conf = loaded.find("CONF")) {
        c.config = run_config_from_string(std::string(conf->payload.begin(), conf->payload.end()));
    }
    if (const auto* meta = loaded.find("META")) {
        try {
            c.meta = nlohmann::json::parse(std::string(meta->payload.begin(), meta->payload.end()));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("corrupt checkpoint META section: ") + e.what());
        }
    }
    return c;
}

// --- Full run with persisted outputs ----------------------------------------

struct RunOutputs {
    std::string metrics = "metrics.jsonl";
    std::string boundaries = "boundary_reports.jsonl";
    std::string summary = "summary.csv";
    std::string checkpoint = "checkpoint.bin";
};

inline std::string summary_csv(const TrainResult& r) {
    return summary_csv_header(r.stream.tasks.size()) + "\n" +
           summary_csv_row(to_string(r.config.method), to_string(r.stream.scenario), r.config.seed, r.record) + "\n";
}

inline TrainResult run_to_directory(const RunConfig& cfg, const std::string& out_dir, const RunOutputs& names = {}) {
    cfg.validate();
    auto stream = build_stream(cfg);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    JsonlWriter metrics((dir / names.metrics).string());
    JsonlWriter boundaries((dir / names.boundaries).string());
    TrainHooks hooks;
    hooks.on_metric = [&](const nlohmann::json& j) { metrics.write(j); };
    hooks.on_boundary = [&](const nlohmann::json& j) { boundaries.write(j); };
    auto result = ContinualTrainer(cfg, std::move(stream), hooks).run();
    const std::string csv = summary_csv(result);
    io::write_file((dir / names.summary).string(), std::vector<std::uint8_t>(csv.begin(), csv.end()));
    save_checkpoint((dir / names.checkpoint).string(), result);
    return result;
}

// --- Evaluation of a saved checkpoint ---------------------------------------

inline EvalResult evaluate_checkpoint(const Checkpoint& ck, const RunConfig& cfg) {
    const auto stream = build_stream(cfg);
    std::size_t seen = stream.tasks.size();
    if (ck.meta.contains("tasks_seen") && ck.meta["tasks_seen"].get<std::size_t>() > 0) {
        seen = std::min(seen, ck.meta["tasks_seen"].get<std::size_t>());
    }
    require_dim("checkpoint input dim", stream.tasks.front().train.dim(), ck.model.config().input_dim);
    return evaluate(ck.model, stream, ck.memory, seen, cfg.probe);
}

// Subset analysis on a saved model: boundary b splits the stream into tasks
// [0, b) and [b, T).
inline std::vector<SubsetColumn> analyze_checkpoint(const Checkpoint& ck, const RunConfig& cfg, std::size_t k,
                                                    std::size_t n, const std::vector<std::size_t>& boundaries) {
    const auto stream = build_stream(cfg);
    require_dim("checkpoint input dim", stream.tasks.front().train.dim(), ck.model.config().input_dim);
    std::vector<std::size_t> bs = boundaries;
    if (bs.empty()) {
        for (std::size_t b = 1; b < stream.tasks.size(); ++b) {
            bs.push_back(b);
        }
    }
    Rng rng = Rng(cfg.seed).fork(stream_id::subsets);
    std::vector<SubsetColumn> cols;
    for (auto b : bs) {
        if (b == 0 || b >= stream.tasks.size()) {
            throw ConfigError("boundary " + std::to_string(b) + " outside [1, " + std::to_string(stream.tasks.size()) +
                              ")");
        }
        Dataset past_train;
        Dataset past_test;
        Dataset future_train;
        Dataset future_test;
        for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
            (t < b ? past_train : future_train).append(stream.tasks[t].train);
            (t < b ? past_test : future_test).append(stream.tasks[t].test);
        }
        auto col = analyze_subsets(ck.model, past_train, past_test, future_train, future_test, k, n, rng, cfg.probe);
        col.boundary = b;
        cols.push_back(col);
    }
    return cols;
}

// --- Embedding-size sweep ---------------------------------------------------

struct SweepRow {
    std::size_t size = 0;
    std::string method;
    std::string scenario;
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
    std::vector<double> per_seed;
};

inline std::vector<SweepRow> sweep_embedding_size(const RunConfig& base, const std::vector<std::size_t>& sizes) {
    base.validate();
    for (auto s : sizes) {
        if (s == 0 || s > base.model.projection_hidden) {
            throw ConfigError("sweep size " + std::to_string(s) + " must lie in [1, projection_hidden=" +
                              std::to_string(base.model.projection_hidden) + "]");
        }
    }
    std::vector<SweepRow> rows;
    for (auto s : sizes) {
        for (Method m : {Method::sd, Method::ird}) {
            SweepRow row;
            row.size = s;
            row.method = to_string(m);
            row.scenario = to_string(base.scenario);
            for (std::size_t k = 0; k < base.seeds; ++k) {
                RunConfig cfg = base;
                cfg.model.embedding_dim = s;
                cfg.method = m;
                cfg.seed = base.seed + k;
                cfg.subsets.enabled = false;
                row.per_seed.push_back(train_continual(cfg).record.average_accuracy);
            }
            row.n = row.per_seed.size();
            detail::mean_std(row.per_seed, row.mean, row.std);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "size,method,scenario,mean,std,n\n";
    for (const auto& r : rows) {
        out += std::to_string(r.size) + "," + r.method + "," + r.scenario + "," + fixed6(r.mean) + "," +
               fixed6(r.std) + "," + std::to_string(r.n) + "\n";
    }
    return out;
}

}  // namespace lasp
