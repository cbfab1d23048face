#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lasp/boundary.hpp"
#include "lasp/saliency.hpp"

namespace lasp {

struct StepLoss {
    std::size_t task = 0;
    std::size_t epoch = 0;
    double supcon = 0.0;
    double distill = 0.0;
    double total = 0.0;
};

struct PipelineEvent {
    std::size_t seq = 0;
    std::string kind;  // bt_captured | snapshot | mask_trained | salience | first_step | rebalance | eval
    std::size_t task = 0;
};

struct BoundaryReport {
    std::size_t task = 0;
    std::string setting;
    std::size_t dsrs_size = 0;
    std::vector<RestartReport> restarts;
    std::size_t best = 0;
    std::vector<std::size_t> selected;
    bool fallback_full_ird = false;
    std::string note;
    bool has_salience = false;
    SalienceStats salience;
};

struct SubsetColumn {
    std::size_t boundary = 0;  // index of the task about to start
    double past_mean = 0.0;
    double future_mean = 0.0;
    double past_std = 0.0;
    double future_std = 0.0;
};

struct MetricsRecord {
    std::vector<StepLoss> steps;
    std::vector<PipelineEvent> events;
    std::vector<BoundaryReport> boundaries;
    std::vector<std::size_t> detected_boundary_batches;
    // accuracy[r][k]: accuracy on task k at evaluation r (primary scenario)
    std::vector<std::vector<double>> accuracy;
    std::vector<std::vector<double>> task_il_accuracy;
    std::vector<double> final_accuracy;
    double average_accuracy = 0.0;
    double task_il_average = 0.0;
    std::vector<double> forgetting;
    double mean_forgetting = 0.0;
    std::vector<SubsetColumn> subsets;

    [[nodiscard]] const PipelineEvent* first_event(const std::string& kind, std::size_t task) const {
        for (const auto& e : events) {
            if (e.kind == kind && e.task == task) {
                return &e;
            }
        }
        return nullptr;
    }
};

// Max-over-time minus final accuracy for every task but the last.
inline void compute_forgetting(MetricsRecord& rec) {
    rec.forgetting.clear();
    if (rec.accuracy.empty()) {
        rec.mean_forgetting = 0.0;
        return;
    }
    const auto& final_row = rec.accuracy.back();
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t k = 0; k < final_row.size(); ++k) {
        double best = final_row[k];
        for (const auto& row : rec.accuracy) {
            if (k < row.size()) {
                best = std::max(best, row[k]);
            }
        }
        const double f = best - final_row[k];
        rec.forgetting.push_back(f);
        if (k + 1 < final_row.size()) {
            total += f;
            ++counted;
        }
    }
    rec.mean_forgetting = counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

inline nlohmann::json to_json(const BoundaryReport& b) {
    nlohmann::json restarts = nlohmann::json::array();
    for (const auto& r : b.restarts) {
        restarts.push_back({{"index", r.index},
                            {"accuracy", r.accuracy},
                            {"l1", r.l1},
                            {"loss", r.final_loss},
                            {"selected", r.selected},
                            {"degenerate", r.degenerate}});
    }
    nlohmann::json j{{"task", b.task},
                     {"setting", b.setting},
                     {"dsrs_size", b.dsrs_size},
                     {"restarts", restarts},
                     {"best", b.best},
                     {"selected_count", b.selected.size()},
                     {"selected_indices", b.selected},
                     {"fallback_full_ird", b.fallback_full_ird},
                     {"note", b.note}};
    if (b.has_salience) {
        j["salience"] = {{"max_gamma", b.salience.max_gamma},
                         {"mean_gamma", b.salience.mean_gamma},
                         {"nonzero", b.salience.nonzero},
                         {"total", b.salience.total}};
    }
    return j;
}

// Append-only JSON-lines file; each record is flushed as it is written.
class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path) : out_(path, std::ios::trunc) {
        if (!out_) {
            throw Error("cannot open " + path);
        }
    }

    void write(const nlohmann::json& record) {
        out_ << record.dump() << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
};

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string summary_csv_header(std::size_t n_tasks) {
    std::string h = "method,scenario,seed,average_accuracy,mean_forgetting,task_il_average";
    for (std::size_t k = 0; k < n_tasks; ++k) {
        h += ",final_acc_task" + std::to_string(k);
    }
    for (std::size_t k = 0; k < n_tasks; ++k) {
        h += ",forgetting_task" + std::to_string(k);
    }
    return h;
}

inline std::string summary_csv_row(const std::string& method, const std::string& scenario, std::uint64_t seed,
                                   const MetricsRecord& rec) {
    std::string row = method + "," + scenario + "," + std::to_string(seed) + "," + fixed6(rec.average_accuracy) +
                      "," + fixed6(rec.mean_forgetting) + "," + fixed6(rec.task_il_average);
    for (double a : rec.final_accuracy) {
        row += "," + fixed6(a);
    }
    for (double f : rec.forgetting) {
        row += "," + fixed6(f);
    }
    return row;
}

}  // namespace lasp
