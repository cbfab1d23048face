#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lasp/boundary.hpp"
#include "lasp/data.hpp"
#include "lasp/harness/config.hpp"
#include "lasp/harness/metrics.hpp"
#include "lasp/harness/probe.hpp"
#include "lasp/harness/subsets.hpp"
#include "lasp/losses.hpp"
#include "lasp/memory.hpp"
#include "lasp/model.hpp"
#include "lasp/rng.hpp"
#include "lasp/saliency.hpp"

namespace lasp {

// Independent random streams derived from the run seed.
namespace stream_id {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t order = 3;
inline constexpr std::uint64_t augment = 4;
inline constexpr std::uint64_t memory = 5;
inline constexpr std::uint64_t mask = 6;
inline constexpr std::uint64_t buffer = 7;
inline constexpr std::uint64_t rotation = 8;
inline constexpr std::uint64_t subsets = 9;
}  // namespace stream_id

namespace detail {

inline Dataset cap_per_class(const Dataset& d, std::size_t cap) {
    if (cap == 0) {
        return d;
    }
    std::map<int, std::size_t> seen;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (seen[d.labels[i]]++ < cap) {
            keep.push_back(i);
        }
    }
    return d.subset(keep);
}

}  // namespace detail

struct LoadedData {
    Dataset train;
    Dataset test;
};

inline LoadedData load_dataset(const DatasetSpec& spec, Rng& rng) {
    LoadedData out;
    if (spec.kind == "synthetic") {
        const auto source = SyntheticSource::create(spec.classes, spec.dim, spec.separation, rng);
        out.train = source.draw(spec.train_per_class, rng);
        out.test = source.draw(spec.test_per_class, rng);
    } else if (spec.kind == "idx") {
        out.train = load_idx(spec.train_images, spec.train_labels);
        if (!spec.test_images.empty()) {
            out.test = load_idx(spec.test_images, spec.test_labels);
        }
    } else if (spec.kind == "csv") {
        out.train = load_csv(spec.train_csv, spec.csv_header, spec.image_side);
        if (!spec.test_csv.empty()) {
            out.test = load_csv(spec.test_csv, spec.csv_header, spec.image_side);
        }
    } else {
        throw ConfigError("unknown dataset kind '" + spec.kind + "'");
    }
    out.train = detail::cap_per_class(out.train, spec.max_train_per_class);
    if (out.test.empty()) {
        out.test = Dataset{Dense2D(0, out.train.dim()), {}, out.train.image_side};
    } else {
        require_dim("test set dim", out.train.dim(), out.test.dim());
        out.test = detail::cap_per_class(out.test, spec.max_test_per_class);
    }
    return out;
}

inline TaskStream build_stream(const RunConfig& cfg) {
    Rng data_rng = Rng(cfg.seed).fork(stream_id::data);
    const auto data = load_dataset(cfg.dataset, data_rng);
    if (cfg.scenario == Scenario::domain_incremental) {
        Rng rot = Rng(cfg.seed).fork(stream_id::rotation);
        return make_rotated_stream(data.train, data.test, cfg.n_tasks, rot);
    }
    return split_by_class(data.train, data.test, cfg.n_tasks, cfg.scenario);
}

// Buffer key: the label, or a (label, segment) id for domain streams where the
// same label recurs under a new input distribution.
inline int buffer_key(Scenario scenario, int label, std::size_t segment, int label_span) {
    if (scenario == Scenario::domain_incremental) {
        return static_cast<int>(segment) * label_span + label;
    }
    return label;
}

// Cross-field checks that only make sense once the stream is known.
inline void validate_against_stream(const RunConfig& cfg, const TaskStream& stream) {
    cfg.validate();
    if (stream.tasks.empty()) {
        throw ConfigError("stream has no tasks");
    }
    for (const auto& t : stream.tasks) {
        if (t.train.empty()) {
            throw ConfigError("task " + std::to_string(t.id) + " has no training samples");
        }
    }
    std::size_t keys = 0;
    if (stream.scenario == Scenario::domain_incremental) {
        keys = stream.tasks.size() * stream.tasks.front().classes.size();
    } else {
        keys = stream.all_classes().size();
    }
    if (cfg.memory_capacity > 0 && cfg.memory_capacity < keys) {
        throw ConfigError("memory_capacity " + std::to_string(cfg.memory_capacity) + " is below the " +
                          std::to_string(keys) + " buffer classes of this stream");
    }
    if (uses_mask(cfg.method) && cfg.dsrs != DsrsSetting::onlycurrent && cfg.memory_capacity == 0 &&
        stream.tasks.size() > 1) {
        throw ConfigError(std::string("dsrs=") + to_string(cfg.dsrs) + " needs memory_capacity > 0");
    }
    if (uses_mask(cfg.method) && cfg.dsrs == DsrsSetting::onlycurrent) {
        for (std::size_t t = 1; t < stream.tasks.size(); ++t) {
            if (stream.tasks[t].classes.size() < 2) {
                throw ConfigError("dsrs=onlycurrent needs >= 2 classes per task for mask training");
            }
        }
    }
    if (cfg.subsets.enabled && cfg.subsets.k >= cfg.model.embedding_dim) {
        throw ConfigError("subset size k must be < embedding_dim");
    }
}

struct TrainHooks {
    std::function<void(const nlohmann::json&)> on_metric;
    std::function<void(const nlohmann::json&)> on_boundary;
};

struct TrainResult {
    MetricsRecord record;
    Model model;
    ReplayBuffer memory;
    TaskStream stream;
    RunConfig config;
};

class ContinualTrainer {
public:
    ContinualTrainer(RunConfig cfg, TaskStream stream, TrainHooks hooks = {})
        : cfg_(std::move(cfg)), stream_(std::move(stream)), hooks_(std::move(hooks)) {
        validate_against_stream(cfg_, stream_);
        cfg_.model.input_dim = stream_.tasks.front().train.dim();
        cfg_.model.validate();
        const Rng root(cfg_.seed);
        order_rng_ = root.fork(stream_id::order);
        augment_rng_ = root.fork(stream_id::augment);
        memory_rng_ = root.fork(stream_id::memory);
        mask_rng_ = root.fork(stream_id::mask);
        subset_rng_ = root.fork(stream_id::subsets);
        Rng init_rng = root.fork(stream_id::init);
        model_ = Model::init(cfg_.model, init_rng);
        velocity_ = zero_grads(model_);
        memory_ = ReplayBuffer(cfg_.memory_capacity, root.fork(stream_id::buffer).next_u64());
        int max_label = 0;
        for (const auto& t : stream_.tasks) {
            for (int c : t.classes) {
                max_label = std::max(max_label, c);
            }
        }
        label_span_ = max_label + 1;
    }

    TrainResult run() {
        emit({{"event", "config"}, {"config", to_json(cfg_)}, {"input_dim", cfg_.model.input_dim}});
        const bool detector_mode = cfg_.boundary_mode == BoundaryMode::detector;
        BoundaryDetector detector(cfg_.detector);
        std::size_t batch_counter = 0;
        for (std::size_t t = 0; t < stream_.tasks.size(); ++t) {
            const auto& task = stream_.tasks[t];
            for (std::size_t epoch = 0; epoch < cfg_.epochs_per_task; ++epoch) {
                std::vector<std::size_t> order(task.train.size());
                for (std::size_t i = 0; i < order.size(); ++i) {
                    order[i] = i;
                }
                order_rng_.shuffle(order);
                StepLoss epoch_sum{t, epoch, 0.0, 0.0, 0.0};
                std::size_t steps = 0;
                for (std::size_t start = 0; start < order.size();) {
                    const std::size_t n_cur = current_share();
                    const std::size_t end = std::min(order.size(), start + n_cur);
                    const std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                         order.begin() + static_cast<std::ptrdiff_t>(end));
                    start = end;
                    bool boundary = false;
                    if (detector_mode) {
                        const double acc = batch_accuracy(t, chunk);
                        boundary = detector.observe(acc) && batch_counter > 0;
                        if (boundary) {
                            rec_.detected_boundary_batches.push_back(batch_counter);
                        }
                    } else {
                        boundary = t > 0 && epoch == 0 && steps == 0;
                    }
                    if (boundary) {
                        end_segment();
                        ++segment_;
                        on_boundary(t, chunk);
                    }
                    note_segment_samples(t, chunk);
                    const StepLoss loss = step(t, epoch, chunk);
                    if (detector_mode) {
                        update_running_means(t, chunk);
                    }
                    epoch_sum.supcon += loss.supcon;
                    epoch_sum.distill += loss.distill;
                    epoch_sum.total += loss.total;
                    ++steps;
                    ++batch_counter;
                }
                const double inv = 1.0 / static_cast<double>(steps);
                emit({{"event", "epoch"},
                      {"task", t},
                      {"epoch", epoch},
                      {"steps", steps},
                      {"supcon", epoch_sum.supcon * inv},
                      {"distill", epoch_sum.distill * inv},
                      {"total", epoch_sum.total * inv}});
            }
        }
        end_segment();
        finalize();
        return TrainResult{rec_, model_, memory_, stream_, cfg_};
    }

private:
    struct SampleRef {
        std::size_t task;
        std::size_t index;
        bool operator<(const SampleRef& o) const { return task != o.task ? task < o.task : index < o.index; }
    };

    [[nodiscard]] std::size_t current_share() const {
        if (memory_.empty() || cfg_.memory_fraction == 0.0) {
            return cfg_.batch_size;
        }
        const auto n_mem = static_cast<std::size_t>(
            std::llround(static_cast<double>(cfg_.batch_size) * cfg_.memory_fraction));
        return std::max<std::size_t>(1, cfg_.batch_size - n_mem);
    }

    [[nodiscard]] int key_of(int label) const {
        return buffer_key(stream_.scenario, label, segment_, label_span_);
    }

    void emit(const nlohmann::json& j) const {
        if (hooks_.on_metric) {
            hooks_.on_metric(j);
        }
    }

    void event(const std::string& kind, std::size_t task) {
        PipelineEvent e{next_seq_++, kind, task};
        rec_.events.push_back(e);
        emit({{"event", kind}, {"seq", e.seq}, {"task", task}});
    }

    [[nodiscard]] Dataset raw_batch(std::size_t t, const std::vector<std::size_t>& chunk) const {
        Dataset b = stream_.tasks[t].train.subset(chunk);
        for (auto& l : b.labels) {
            l = key_of(l);
        }
        return b;
    }

    void note_segment_samples(std::size_t t, const std::vector<std::size_t>& chunk) {
        for (auto i : chunk) {
            segment_samples_.insert({t, i});
        }
        max_task_seen_ = std::max(max_task_seen_, t);
    }

    StepLoss step(std::size_t t, std::size_t epoch, const std::vector<std::size_t>& chunk) {
        const auto& train = stream_.tasks[t].train;
        std::vector<StoredSample> mem;
        if (!memory_.empty() && cfg_.memory_fraction > 0.0) {
            mem = memory_.sample(cfg_.batch_size - current_share(), memory_rng_);
        }
        const std::size_t n = chunk.size() + mem.size();
        LabeledEmbeddingBatch batch;
        Dense2D views(2 * n, train.dim());
        batch.labels.resize(2 * n);
        batch.view_origin.resize(2 * n);
        batch.current.resize(2 * n);
        auto put = [&](std::size_t slot, std::span<const double> x, int key, bool current) {
            const auto vp = two_views(x, key, slot, train.image_side, cfg_.augment, augment_rng_);
            std::copy(vp.first.begin(), vp.first.end(), views.row(2 * slot).begin());
            std::copy(vp.second.begin(), vp.second.end(), views.row(2 * slot + 1).begin());
            for (std::size_t v = 0; v < 2; ++v) {
                batch.labels[2 * slot + v] = key;
                batch.view_origin[2 * slot + v] = slot;
                batch.current[2 * slot + v] = current;
            }
        };
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            put(i, train.inputs.row(chunk[i]), key_of(train.labels[chunk[i]]), true);
        }
        for (std::size_t i = 0; i < mem.size(); ++i) {
            put(chunk.size() + i, mem[i].input, mem[i].key, false);
        }

        if (!first_step_logged_.count(t)) {
            first_step_logged_.insert(t);
            event("first_step", t);
        }

        const auto fwd = model_.embed(views);
        batch.embeddings = fwd.embeddings;
        const auto sc = async_supcon(batch, cfg_.supcon);
        StepLoss out{t, epoch, sc.loss, 0.0, sc.loss};

        const double scale = 1.0 / static_cast<double>(2 * n);
        const bool distill = past_.has_value() && uses_distillation(cfg_.method);
        std::optional<LossResult> d;
        if (distill) {
            const Dense2D old = past_->embed(views).embeddings;
            d = selective_ ? selective_ird(old, fwd.embeddings, dims_, cfg_.ird)
                           : full_ird(old, fwd.embeddings, cfg_.ird);
            out.distill = d->loss;
            out.total = sc.loss + cfg_.distill_weight * d->loss;
        }

        ParamGrads grads;
        const bool modulate = salience_.has_value() && uses_modulation(cfg_.method);
        if (modulate && cfg_.modulate_scope == ModulateScope::contrastive && d) {
            Dense2D g_sc = sc.grad;
            for (auto& v : g_sc.data()) {
                v *= scale;
            }
            grads = model_.backward(fwd, g_sc);
            modulate_gradients(grads, *salience_);
            Dense2D g_d = d->grad;
            for (auto& v : g_d.data()) {
                v *= cfg_.distill_weight * scale;
            }
            accumulate(grads, model_.backward(fwd, g_d));
        } else {
            Dense2D g = sc.grad;
            if (d) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g.data()[i] += cfg_.distill_weight * d->grad.data()[i];
                }
            }
            for (auto& v : g.data()) {
                v *= scale;
            }
            grads = model_.backward(fwd, g);
            if (modulate) {
                modulate_gradients(grads, *salience_);
            }
        }
        apply_sgd(grads);
        rec_.steps.push_back(out);
        return out;
    }

    void apply_sgd(const ParamGrads& grads) {
        auto& layers = model_.layers();
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& vw = velocity_[l].weights.data();
            const auto& gw = grads[l].weights.data();
            auto& w = layers[l].weights.data();
            for (std::size_t k = 0; k < w.size(); ++k) {
                vw[k] = cfg_.momentum * vw[k] + gw[k];
                w[k] -= cfg_.learning_rate * vw[k];
            }
            auto& vb = velocity_[l].bias;
            const auto& gb = grads[l].bias;
            auto& b = layers[l].bias;
            for (std::size_t k = 0; k < b.size(); ++k) {
                vb[k] = cfg_.momentum * vb[k] + gb[k];
                b[k] -= cfg_.learning_rate * vb[k];
            }
        }
    }

    // Capture B_t -> snapshot -> mask training -> salience, strictly before the
    // first optimizer step on the new segment.
    void on_boundary(std::size_t t, const std::vector<std::size_t>& chunk) {
        const Dataset bt = raw_batch(t, chunk);
        event("bt_captured", t);

        maybe_analyze_subsets(t);

        past_.emplace(model_);
        event("snapshot", t);

        BoundaryReport report;
        report.task = t;
        report.setting = to_string(cfg_.dsrs);
        selective_ = false;
        dims_.clear();
        salience_.reset();
        if (uses_mask(cfg_.method)) {
            std::optional<MaskVector> mask;
            Dataset dsrs;
            try {
                dsrs = assemble_dsrs(memory_, bt, cfg_.dsrs);
                report.dsrs_size = dsrs.size();
                if (cfg_.force_full_mask) {
                    const double v = cfg_.mask.rule == SelectionRule::keep_above ? 20.0 : -20.0;
                    mask = MaskVector::uniform(cfg_.model.embedding_dim, v);
                    report.note = "full mask forced";
                } else {
                    auto trained = train_salient_mask(past_->model(), dsrs, cfg_.mask, mask_rng_);
                    report.restarts = trained.restarts;
                    report.best = trained.best;
                    mask = trained.mask;
                }
                dims_ = selected_dims(*mask, cfg_.mask.selection());
                if (dims_.empty()) {
                    report.note = "mask selected no dimensions; falling back to full IRD";
                    mask.reset();
                }
            } catch (const Error& e) {
                report.note = std::string("mask training failed, falling back to full IRD: ") + e.what();
                mask.reset();
                dims_.clear();
            }
            report.selected = dims_;
            report.fallback_full_ird = !mask.has_value();
            selective_ = uses_selective_distillation(cfg_.method) && mask.has_value();
            event("mask_trained", t);

            if (uses_modulation(cfg_.method)) {
                if (cfg_.force_zero_salience || !mask) {
                    salience_ = ParameterSalience::zeros_like(model_.layers());
                } else {
                    const auto p_out = init_output_salience(*mask, cfg_.mask.selection(), cfg_.salience_source);
                    salience_ = weight_salience(propagate_mwp(model_, dsrs.inputs, p_out));
                }
                report.has_salience = true;
                report.salience = salience_stats(*salience_);
                event("salience", t);
            }
            rec_.boundaries.push_back(report);
            if (hooks_.on_boundary) {
                auto j = to_json(report);
                j["method"] = to_string(cfg_.method);
                hooks_.on_boundary(j);
            }
        }
    }

    void maybe_analyze_subsets(std::size_t t) {
        if (!cfg_.subsets.enabled) {
            return;
        }
        if (cfg_.subsets.max_boundaries > 0 && rec_.subsets.size() >= cfg_.subsets.max_boundaries) {
            return;
        }
        Dataset past_train;
        Dataset past_test;
        Dataset future_train;
        Dataset future_test;
        for (std::size_t k = 0; k < stream_.tasks.size(); ++k) {
            const auto& task = stream_.tasks[k];
            (k < t ? past_train : future_train).append(task.train);
            (k < t ? past_test : future_test).append(task.test);
        }
        auto col = analyze_subsets(model_, past_train, past_test, future_train, future_test, cfg_.subsets.k,
                                   cfg_.subsets.n, subset_rng_, cfg_.probe);
        col.boundary = t;
        rec_.subsets.push_back(col);
        emit({{"event", "subsets"},
              {"boundary", t},
              {"past_mean", col.past_mean},
              {"future_mean", col.future_mean},
              {"past_std", col.past_std},
              {"future_std", col.future_std}});
    }

    // Rebalance memory with the segment's samples, then evaluate.
    void end_segment() {
        if (segment_samples_.empty()) {
            return;
        }
        if (memory_.capacity() > 0) {
            std::vector<StoredSample> incoming;
            incoming.reserve(segment_samples_.size());
            for (const auto& ref : segment_samples_) {
                const auto& d = stream_.tasks[ref.task].train;
                const auto row = d.inputs.row(ref.index);
                incoming.push_back({std::vector<double>(row.begin(), row.end()), d.labels[ref.index],
                                    key_of(d.labels[ref.index]), static_cast<int>(ref.task)});
            }
            memory_.rebalance_after_task(incoming);
            event("rebalance", max_task_seen_);
        }
        segment_samples_.clear();
        running_sums_.clear();
        running_counts_.clear();
        memory_means_dirty_ = true;

        const auto res = evaluate(model_, stream_, memory_, max_task_seen_ + 1, cfg_.probe);
        const auto& primary = stream_.scenario == Scenario::domain_incremental ? res.domain_il
                              : stream_.scenario == Scenario::task_incremental ? res.task_il
                                                                               : res.class_il;
        rec_.accuracy.push_back(primary);
        rec_.task_il_accuracy.push_back(stream_.scenario == Scenario::domain_incremental ? res.domain_il
                                                                                         : res.task_il);
        event("eval", max_task_seen_);
        emit({{"event", "accuracy"},
              {"tasks_seen", max_task_seen_ + 1},
              {"primary", primary},
              {"task_il", rec_.task_il_accuracy.back()},
              {"class_il", res.class_il},
              {"average", res.average}});
    }

    void finalize() {
        rec_.final_accuracy = rec_.accuracy.empty() ? std::vector<double>{} : rec_.accuracy.back();
        rec_.average_accuracy = mean_of(rec_.final_accuracy);
        rec_.task_il_average = rec_.task_il_accuracy.empty() ? 0.0 : mean_of(rec_.task_il_accuracy.back());
        compute_forgetting(rec_);
        emit({{"event", "final"},
              {"final_accuracy", rec_.final_accuracy},
              {"average_accuracy", rec_.average_accuracy},
              {"task_il_average", rec_.task_il_average},
              {"forgetting", rec_.forgetting},
              {"mean_forgetting", rec_.mean_forgetting},
              {"parameter_hash", model_.parameter_hash()}});
    }

    // Detector signal: NCMC accuracy of the incoming batch (before training on
    // it) against class means from memory plus the current segment so far.
    double batch_accuracy(std::size_t t, const std::vector<std::size_t>& chunk) {
        if (memory_means_dirty_) {
            memory_sums_.clear();
            memory_counts_.clear();
            const auto stored = memory_.flattened();
            if (!stored.empty()) {
                Dense2D x(stored.size(), stored.front()->input.size());
                for (std::size_t i = 0; i < stored.size(); ++i) {
                    std::copy(stored[i]->input.begin(), stored[i]->input.end(), x.row(i).begin());
                }
                const auto e = model_.embed(x).embeddings;
                for (std::size_t i = 0; i < stored.size(); ++i) {
                    add_to(memory_sums_, memory_counts_, stored[i]->label, e.row(i));
                }
            }
            memory_means_dirty_ = false;
        }
        auto sums = memory_sums_;
        auto counts = memory_counts_;
        for (const auto& [label, s] : running_sums_) {
            auto& dst = sums[label];
            dst.resize(s.size(), 0.0);
            for (std::size_t k = 0; k < s.size(); ++k) {
                dst[k] += s[k];
            }
            counts[label] += running_counts_.at(label);
        }
        if (sums.empty()) {
            return 0.0;
        }
        ClassMeans means;
        for (const auto& [label, s] : sums) {
            std::vector<double> m(s);
            for (auto& v : m) {
                v /= static_cast<double>(counts[label]);
            }
            means.means[label] = std::move(m);
            means.counts[label] = counts[label];
        }
        const auto& train = stream_.tasks[t].train;
        const auto e = model_.embed(train.subset(chunk).inputs).embeddings;
        std::vector<int> labels;
        for (auto i : chunk) {
            labels.push_back(train.labels[i]);
        }
        try {
            return MaskedNcmc(means, MaskVector::uniform(e.cols())).accuracy(e, labels);
        } catch (const Error&) {
            return 0.0;
        }
    }

    void update_running_means(std::size_t t, const std::vector<std::size_t>& chunk) {
        const auto& train = stream_.tasks[t].train;
        const auto e = model_.embed(train.subset(chunk).inputs).embeddings;
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            add_to(running_sums_, running_counts_, train.labels[chunk[i]], e.row(i));
        }
    }

    static void add_to(std::map<int, std::vector<double>>& sums, std::map<int, std::size_t>& counts, int label,
                       std::span<const double> e) {
        auto& s = sums[label];
        s.resize(e.size(), 0.0);
        for (std::size_t k = 0; k < e.size(); ++k) {
            s[k] += e[k];
        }
        ++counts[label];
    }

    RunConfig cfg_;
    TaskStream stream_;
    TrainHooks hooks_;
    Model model_;
    ParamGrads velocity_;
    ReplayBuffer memory_;
    Rng order_rng_{0};
    Rng augment_rng_{0};
    Rng memory_rng_{0};
    Rng mask_rng_{0};
    Rng subset_rng_{0};
    int label_span_ = 1;
    std::size_t segment_ = 0;
    std::size_t max_task_seen_ = 0;
    std::size_t next_seq_ = 0;
    std::set<SampleRef> segment_samples_;
    std::set<std::size_t> first_step_logged_;
    std::optional<ModelSnapshot> past_;
    bool selective_ = false;
    std::vector<std::size_t> dims_;
    std::optional<ParameterSalience> salience_;
    std::map<int, std::vector<double>> running_sums_;
    std::map<int, std::size_t> running_counts_;
    std::map<int, std::vector<double>> memory_sums_;
    std::map<int, std::size_t> memory_counts_;
    bool memory_means_dirty_ = true;
    MetricsRecord rec_;
};

inline TrainResult train_continual(const RunConfig& cfg, const TrainHooks& hooks = {}) {
    cfg.validate();
    return ContinualTrainer(cfg, build_stream(cfg), hooks).run();
}

}  // namespace lasp
