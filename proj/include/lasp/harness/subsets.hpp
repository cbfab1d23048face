#pragma once

#include <cmath>
#include <vector>

#include "lasp/data.hpp"
#include "lasp/harness/metrics.hpp"
#include "lasp/harness/probe.hpp"
#include "lasp/model.hpp"
#include "lasp/rng.hpp"

namespace lasp {

struct SubsetDraw {
    std::vector<std::size_t> dims;
    double past_accuracy = 0.0;
    double future_accuracy = 0.0;
};

namespace detail {

inline Dense2D restrict_columns(const Dense2D& e, const std::vector<std::size_t>& dims) {
    Dense2D out(e.rows(), dims.size());
    for (std::size_t i = 0; i < e.rows(); ++i) {
        for (std::size_t k = 0; k < dims.size(); ++k) {
            out(i, k) = e(i, dims[k]);
        }
    }
    return out;
}

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    // Population deviation, so a single subset reports 0.
    sd = v.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(v.size()));
}

inline double probe_score(const Dense2D& train_e, const std::vector<int>& train_labels, const Dense2D& test_e,
                          const std::vector<int>& test_labels, const ProbeConfig& probe) {
    const auto p = LinearProbe::train(train_e, train_labels, probe);
    if (test_e.rows() == 0) {
        return p.accuracy(train_e, train_labels);
    }
    return p.accuracy(test_e, test_labels);
}

}  // namespace detail

// Linear-probe accuracy of random k-dim embedding subsets on past and future
// data. Probes train on each side's train split and score its test split (the
// train split itself when no test split exists).
inline std::vector<SubsetDraw> subset_draws(const Model& model, const Dataset& past_train, const Dataset& past_test,
                                            const Dataset& future_train, const Dataset& future_test, std::size_t k,
                                            std::size_t n_subsets, Rng& rng, const ProbeConfig& probe) {
    const std::size_t dim = model.config().embedding_dim;
    if (k == 0 || k >= dim) {
        throw ConfigError("analyze_subsets: k must satisfy 0 < k < embedding_dim (" + std::to_string(dim) + ")");
    }
    require(!past_train.empty() && !future_train.empty(), "analyze_subsets: past and future data must be non-empty");
    const Dense2D past_tr = model.embed(past_train.inputs).embeddings;
    const Dense2D past_te = past_test.empty() ? Dense2D(0, dim) : model.embed(past_test.inputs).embeddings;
    const Dense2D fut_tr = model.embed(future_train.inputs).embeddings;
    const Dense2D fut_te = future_test.empty() ? Dense2D(0, dim) : model.embed(future_test.inputs).embeddings;
    std::vector<SubsetDraw> out;
    out.reserve(n_subsets);
    for (std::size_t s = 0; s < n_subsets; ++s) {
        SubsetDraw d;
        d.dims = rng.choose(dim, k);
        d.past_accuracy = detail::probe_score(detail::restrict_columns(past_tr, d.dims), past_train.labels,
                                              detail::restrict_columns(past_te, d.dims), past_test.labels, probe);
        d.future_accuracy = detail::probe_score(detail::restrict_columns(fut_tr, d.dims), future_train.labels,
                                                detail::restrict_columns(fut_te, d.dims), future_test.labels, probe);
        out.push_back(std::move(d));
    }
    return out;
}

inline SubsetColumn summarize_subsets(const std::vector<SubsetDraw>& draws) {
    std::vector<double> past;
    std::vector<double> future;
    for (const auto& d : draws) {
        past.push_back(d.past_accuracy);
        future.push_back(d.future_accuracy);
    }
    SubsetColumn col;
    detail::mean_std(past, col.past_mean, col.past_std);
    detail::mean_std(future, col.future_mean, col.future_std);
    return col;
}

inline SubsetColumn analyze_subsets(const Model& model, const Dataset& past_train, const Dataset& past_test,
                                    const Dataset& future_train, const Dataset& future_test, std::size_t k,
                                    std::size_t n_subsets, Rng& rng, const ProbeConfig& probe) {
    return summarize_subsets(
        subset_draws(model, past_train, past_test, future_train, future_test, k, n_subsets, rng, probe));
}

// Four-row table, one column per boundary.
inline std::string format_subset_table(const std::vector<SubsetColumn>& cols) {
    std::string out = "row";
    for (const auto& c : cols) {
        out += ",boundary_" + std::to_string(c.boundary);
    }
    out += "\n";
    const char* names[4] = {"mean_past", "mean_future", "std_past", "std_future"};
    for (int r = 0; r < 4; ++r) {
        out += names[r];
        for (const auto& c : cols) {
            const double v = r == 0 ? c.past_mean : r == 1 ? c.future_mean : r == 2 ? c.past_std : c.future_std;
            out += "," + fixed6(v);
        }
        out += "\n";
    }
    return out;
}

}  // namespace lasp
