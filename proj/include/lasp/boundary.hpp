#pragma once

#include <cmath>
#include <deque>
#include <numeric>
#include <string>
#include <vector>

#include "lasp/data.hpp"
#include "lasp/error.hpp"
#include "lasp/losses.hpp"
#include "lasp/memory.hpp"
#include "lasp/model.hpp"
#include "lasp/rng.hpp"

namespace lasp {

enum class DsrsSetting { onlypast, onlycurrent, combined };

inline const char* to_string(DsrsSetting s) {
    switch (s) {
        case DsrsSetting::onlypast:
            return "onlypast";
        case DsrsSetting::onlycurrent:
            return "onlycurrent";
        case DsrsSetting::combined:
            return "combined";
    }
    return "?";
}

// Builds the salient-subset selection set. Labels are buffer keys, so the
// first batch must be labelled with the same key scheme as the memory.
inline Dataset assemble_dsrs(const ReplayBuffer& memory, const Dataset& first_batch, DsrsSetting setting) {
    const bool use_memory = setting != DsrsSetting::onlycurrent;
    const bool use_batch = setting != DsrsSetting::onlypast;
    if (use_memory && memory.empty()) {
        throw Error(std::string("D_SRS setting ") + to_string(setting) + " needs a non-empty memory");
    }
    if (use_batch && first_batch.empty()) {
        throw Error(std::string("D_SRS setting ") + to_string(setting) + " needs the first batch of the new task");
    }
    Dataset out;
    if (use_memory) {
        const auto stored = memory.flattened();
        const std::size_t dim = stored.front()->input.size();
        out.inputs = Dense2D(stored.size(), dim);
        out.image_side = first_batch.image_side;
        for (std::size_t i = 0; i < stored.size(); ++i) {
            require_dim("memory sample dim", dim, stored[i]->input.size());
            std::copy(stored[i]->input.begin(), stored[i]->input.end(), out.inputs.row(i).begin());
            out.labels.push_back(stored[i]->key);
        }
    }
    if (use_batch) {
        out.append(first_batch);
    }
    return out;
}

struct MaskTrainConfig {
    std::size_t restarts = 8;
    std::size_t epochs = 100;
    double step_size = 2.0;
    double lambda = 0.001;
    double threshold = 0.5;
    double init_scale = 0.5;
    SelectionRule rule = SelectionRule::keep_above;
    AlignmentSign sign = AlignmentSign::maximize;

    void validate() const {
        if (restarts < 1) {
            throw ConfigError("mask training needs restarts >= 1");
        }
        if (!(threshold > 0.0 && threshold < 1.0)) {
            throw ConfigError("mask threshold must lie in (0, 1)");
        }
        if (lambda < 0.0) {
            throw ConfigError("mask lambda must be >= 0");
        }
        if (step_size < 0.0 || init_scale < 0.0) {
            throw ConfigError("mask step_size and init_scale must be >= 0");
        }
    }

    [[nodiscard]] SelectionConfig selection() const { return {threshold, rule}; }
};

struct RestartReport {
    std::size_t index = 0;
    double accuracy = 0.0;
    double l1 = 0.0;
    double final_loss = 0.0;
    std::size_t selected = 0;
    bool degenerate = false;
    std::string failure;
};

struct MaskTrainResult {
    MaskVector mask;
    std::vector<RestartReport> restarts;
    std::size_t best = 0;
};

// Restarts from s ~ U(-init_scale, init_scale), runs plain gradient descent
// on the mask loss, and keeps the candidate with the best masked-NCMC
// accuracy on the set itself (ties: smaller |s|_1, then restart index).
inline MaskTrainResult train_salient_mask(const Dense2D& embeddings, const std::vector<int>& labels,
                                          const MaskTrainConfig& cfg, Rng& rng) {
    cfg.validate();
    require_dim("mask training labels", embeddings.rows(), labels.size());
    const auto means = class_means(embeddings, labels);
    if (means.means.size() < 2) {
        throw Error("salient mask training needs >= 2 classes in D_SRS, got " + std::to_string(means.means.size()));
    }
    const std::size_t d = embeddings.cols();
    MaskTrainResult result;
    bool have_best = false;
    std::vector<MaskVector> candidates;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        MaskVector s{std::vector<double>(d)};
        for (auto& v : s.raw) {
            v = rng.uniform(-cfg.init_scale, cfg.init_scale);
        }
        RestartReport rep;
        rep.index = r;
        try {
            for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
                const auto step = mask_training_loss(embeddings, labels, means, s, cfg.lambda, cfg.sign);
                for (std::size_t k = 0; k < d; ++k) {
                    s.raw[k] -= cfg.step_size * step.grad[k];
                }
            }
            rep.final_loss = mask_training_loss(embeddings, labels, means, s, cfg.lambda, cfg.sign).loss;
            rep.accuracy = MaskedNcmc(means, s).accuracy(embeddings, labels);
        } catch (const NumericError& e) {
            rep.degenerate = true;
            rep.failure = e.what();
        } catch (const Error& e) {
            rep.degenerate = true;
            rep.failure = e.what();
        }
        rep.l1 = s.l1();
        rep.selected = selected_dims(s, cfg.selection()).size();
        if (!rep.degenerate) {
            const auto& best = have_best ? result.restarts[result.best] : rep;
            const bool better = !have_best || rep.accuracy > best.accuracy ||
                                (rep.accuracy == best.accuracy && rep.l1 < best.l1);
            if (better) {
                result.best = r;
                result.mask = s;
                have_best = true;
            }
        }
        result.restarts.push_back(rep);
    }
    if (!have_best) {
        std::string why = "salient mask training degenerate on every restart:";
        for (const auto& rep : result.restarts) {
            why += " [" + std::to_string(rep.index) + "] " + rep.failure + ";";
        }
        throw NumericError(why);
    }
    return result;
}

// Frozen-model variant: embeds the unaugmented D_SRS inputs first.
inline MaskTrainResult train_salient_mask(const Model& model, const Dataset& dsrs, const MaskTrainConfig& cfg,
                                          Rng& rng) {
    return train_salient_mask(model.embed(dsrs.inputs).embeddings, dsrs.labels, cfg, rng);
}

struct BoundaryDetectorConfig {
    std::size_t window = 5;
    double drop_ratio = 0.5;

    void validate() const {
        if (window < 1) {
            throw ConfigError("boundary detector window must be >= 1");
        }
        if (!(drop_ratio > 0.0 && drop_ratio < 1.0)) {
            throw ConfigError("boundary detector drop_ratio must lie in (0, 1)");
        }
    }
};

// Flags a batch whose accuracy falls below drop_ratio times the mean of the
// previous `window` batches. Emits nothing until the window is full, and
// starts a fresh window after each flag.
class BoundaryDetector {
public:
    explicit BoundaryDetector(BoundaryDetectorConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    bool observe(double accuracy) {
        bool flag = false;
        if (history_.size() == cfg_.window) {
            const double mean = std::accumulate(history_.begin(), history_.end(), 0.0) /
                                static_cast<double>(history_.size());
            flag = accuracy < cfg_.drop_ratio * mean;
        }
        if (flag) {
            history_.clear();
            return true;
        }
        history_.push_back(accuracy);
        if (history_.size() > cfg_.window) {
            history_.pop_front();
        }
        return false;
    }

    void reset() { history_.clear(); }

private:
    BoundaryDetectorConfig cfg_;
    std::deque<double> history_;
};

inline std::vector<bool> detect_boundary(const std::vector<double>& accuracy_stream,
                                         const BoundaryDetectorConfig& cfg = {}) {
    BoundaryDetector detector(cfg);
    std::vector<bool> flags;
    flags.reserve(accuracy_stream.size());
    for (double a : accuracy_stream) {
        flags.push_back(detector.observe(a));
    }
    return flags;
}

// Oracle mode: a boundary wherever the stream-provided task id changes.
inline std::vector<bool> oracle_boundaries(const std::vector<int>& task_ids) {
    std::vector<bool> flags(task_ids.size(), false);
    for (std::size_t i = 1; i < task_ids.size(); ++i) {
        flags[i] = task_ids[i] != task_ids[i - 1];
    }
    return flags;
}

}  // namespace lasp
