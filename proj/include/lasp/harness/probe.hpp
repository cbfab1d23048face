#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "lasp/data.hpp"
#include "lasp/harness/config.hpp"
#include "lasp/memory.hpp"
#include "lasp/model.hpp"
#include "lasp/numerics.hpp"

namespace lasp {

// Multinomial logistic regression trained by full-batch gradient descent from
// a zero start. Used as the evaluation classifier on frozen features.
class LinearProbe {
public:
    static LinearProbe train(const Dense2D& features, const std::vector<int>& labels, const ProbeConfig& cfg) {
        require_dim("probe labels", features.rows(), labels.size());
        require(features.rows() > 0, "probe: empty training pool");
        LinearProbe p;
        const std::set<int> uniq(labels.begin(), labels.end());
        p.classes_.assign(uniq.begin(), uniq.end());
        std::map<int, std::size_t> index;
        for (std::size_t c = 0; c < p.classes_.size(); ++c) {
            index[p.classes_[c]] = c;
        }
        const std::size_t n = features.rows();
        const std::size_t d = features.cols();
        const std::size_t k = p.classes_.size();
        p.weights_ = Dense2D(d, k);
        p.bias_.assign(k, 0.0);
        std::vector<std::size_t> target(n);
        std::vector<std::size_t> per_class(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            target[i] = index[labels[i]];
            ++per_class[target[i]];
        }
        // Sample weights sum to 1; balanced weighting gives every class equal mass.
        std::vector<double> weight(n, 1.0 / static_cast<double>(n));
        if (cfg.balanced) {
            for (std::size_t i = 0; i < n; ++i) {
                weight[i] = 1.0 / static_cast<double>(k * per_class[target[i]]);
            }
        }
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            Dense2D delta = matmul(features, p.weights_);
            for (std::size_t i = 0; i < n; ++i) {
                auto row = delta.row(i);
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < k; ++c) {
                    row[c] += p.bias_[c];
                    mx = std::max(mx, row[c]);
                }
                double z = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    row[c] = std::exp(row[c] - mx);
                    z += row[c];
                }
                for (std::size_t c = 0; c < k; ++c) {
                    row[c] = (row[c] / z - (c == target[i] ? 1.0 : 0.0)) * weight[i];
                }
            }
            const Dense2D grad_w = matmul_tn(features, delta);
            for (std::size_t t = 0; t < grad_w.size(); ++t) {
                p.weights_.data()[t] -= cfg.step * grad_w.data()[t];
            }
            for (std::size_t c = 0; c < k; ++c) {
                double g = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    g += delta(i, c);
                }
                p.bias_[c] -= cfg.step * g;
            }
        }
        return p;
    }

    // Argmax over `allowed` labels (all trained labels when empty). Allowed
    // labels the probe never saw score as 0 logits. Ties go to the smaller id.
    [[nodiscard]] int predict(std::span<const double> x, const std::vector<int>& allowed = {}) const {
        require_dim("probe feature length", weights_.rows(), x.size());
        std::map<int, double> score;
        for (std::size_t c = 0; c < classes_.size(); ++c) {
            double s = bias_[c];
            for (std::size_t j = 0; j < x.size(); ++j) {
                s += x[j] * weights_(j, c);
            }
            score[classes_[c]] = s;
        }
        const std::vector<int>& candidates = allowed.empty() ? classes_ : allowed;
        int best = candidates.front();
        double best_score = -std::numeric_limits<double>::infinity();
        for (int c : candidates) {
            const auto it = score.find(c);
            const double s = it == score.end() ? 0.0 : it->second;
            if (s > best_score || (s == best_score && c < best)) {
                best_score = s;
                best = c;
            }
        }
        return best;
    }

    [[nodiscard]] double accuracy(const Dense2D& x, const std::vector<int>& labels,
                                  const std::vector<int>& allowed = {}) const {
        require_dim("probe accuracy labels", x.rows(), labels.size());
        if (x.rows() == 0) {
            return 0.0;
        }
        std::size_t hits = 0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            hits += predict(x.row(i), allowed) == labels[i] ? 1 : 0;
        }
        return static_cast<double>(hits) / static_cast<double>(x.rows());
    }

    [[nodiscard]] const std::vector<int>& classes() const { return classes_; }

private:
    Dense2D weights_;
    std::vector<double> bias_;
    std::vector<int> classes_;
};

struct EvalResult {
    std::vector<double> class_il;   // per seen task
    std::vector<double> task_il;    // per seen task
    std::vector<double> domain_il;  // per seen task
    double average = 0.0;          // mean under the stream's scenario
};

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

// Pool of memory samples plus the most recent task's training data, with
// their ground-truth labels.
inline Dataset probe_pool(const ReplayBuffer& memory, const Dataset& last_task) {
    Dataset pool;
    const auto stored = memory.flattened();
    if (!stored.empty()) {
        const std::size_t dim = stored.front()->input.size();
        pool.inputs = Dense2D(stored.size(), dim);
        for (std::size_t i = 0; i < stored.size(); ++i) {
            std::copy(stored[i]->input.begin(), stored[i]->input.end(), pool.inputs.row(i).begin());
            pool.labels.push_back(stored[i]->label);
        }
    }
    pool.append(last_task);
    if (pool.empty()) {
        throw Error("evaluate: memory and last-task set are both empty");
    }
    return pool;
}

// Trains a probe on the representations of memory + last-task samples, then
// scores each seen task's test set. Class-IL ranks all seen classes, Task-IL
// only the task's own classes, Domain-IL the shared class set.
inline EvalResult evaluate(const Model& model, const TaskStream& stream, const ReplayBuffer& memory,
                           std::size_t tasks_seen, const ProbeConfig& cfg) {
    require(tasks_seen >= 1 && tasks_seen <= stream.tasks.size(), "evaluate: tasks_seen out of range");
    const Dataset pool = probe_pool(memory, stream.tasks[tasks_seen - 1].train);
    const auto probe = LinearProbe::train(model.representations(pool.inputs), pool.labels, cfg);

    std::set<int> seen;
    for (std::size_t t = 0; t < tasks_seen; ++t) {
        seen.insert(stream.tasks[t].classes.begin(), stream.tasks[t].classes.end());
    }
    const std::vector<int> seen_classes(seen.begin(), seen.end());

    EvalResult out;
    for (std::size_t t = 0; t < tasks_seen; ++t) {
        const auto& task = stream.tasks[t];
        const Dense2D reps = model.representations(task.test.inputs);
        if (stream.scenario == Scenario::domain_incremental) {
            out.domain_il.push_back(probe.accuracy(reps, task.test.labels, seen_classes));
        } else {
            out.class_il.push_back(probe.accuracy(reps, task.test.labels, seen_classes));
            out.task_il.push_back(probe.accuracy(reps, task.test.labels, task.classes));
        }
    }
    switch (stream.scenario) {
        case Scenario::class_incremental:
            out.average = mean_of(out.class_il);
            break;
        case Scenario::task_incremental:
            out.average = mean_of(out.task_il);
            break;
        case Scenario::domain_incremental:
            out.average = mean_of(out.domain_il);
            break;
    }
    return out;
}

}  // namespace lasp
