// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "support.hpp"

using namespace lasp;
using namespace lasp::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// --- 1 -------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst[4] = {0, 0, 0, 0};
    const double tol = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        // Async SupCon on <= 8 views.
        {
            const std::size_t origins = 2 + rng.below(3);
            const std::size_t dim = 2 + rng.below(15);
            auto b = random_batch(origins, dim, 2, 1 + rng.below(origins), rng);
            const std::size_t rows = b.embeddings.rows();
            const auto r = async_supcon(b, {0.5});
            auto fn = [&](std::span<const double> x) {
                auto c = b;
                c.embeddings = reshape(x, rows, dim);
                return async_supcon(c, {0.5}).loss;
            };
            worst[0] = std::max(worst[0], relative_error(r.grad.data(), finite_diff_grad(fn, b.embeddings.data())));
        }
        // IRD.
        {
            // dim >= 2: unit rows in one dim are +-1, and a same-sign draw sits
            // exactly at the minimum where the gradient is identically zero.
            const std::size_t rows = 2 + rng.below(7);
            const std::size_t dim = 2 + rng.below(15);
            const IRDConfig cfg{0.2, 0.1};
            const auto e_old = unit_rows(rows, dim, rng);
            const auto e_new = unit_rows(rows, dim, rng);
            const auto r = full_ird(e_old, e_new, cfg);
            auto fn = [&](std::span<const double> x) { return full_ird(e_old, reshape(x, rows, dim), cfg).loss; };
            worst[1] = std::max(worst[1], relative_error(r.grad.data(), finite_diff_grad(fn, e_new.data())));
        }
        // Selective IRD on a random non-empty slice.
        {
            const std::size_t rows = 2 + rng.below(7);
            const std::size_t dim = 2 + rng.below(15);
            const IRDConfig cfg{0.2, 0.1};
            const auto e_old = unit_rows(rows, dim, rng);
            const auto e_new = unit_rows(rows, dim, rng);
            auto dims = rng.choose(dim, 1 + rng.below(dim));
            std::sort(dims.begin(), dims.end());
            const auto r = selective_ird(e_old, e_new, dims, cfg);
            auto fn = [&](std::span<const double> x) {
                return selective_ird(e_old, reshape(x, rows, dim), dims, cfg).loss;
            };
            worst[2] = std::max(worst[2], relative_error(r.grad.data(), finite_diff_grad(fn, e_new.data())));
        }
        // Mask-training loss with respect to the raw mask.
        {
            const std::size_t dim = 2 + rng.below(15);
            const std::size_t n = 4 + rng.below(5);
            const auto e = unit_rows(n, dim, rng);
            std::vector<int> labels(n);
            for (std::size_t i = 0; i < n; ++i) {
                labels[i] = static_cast<int>(i % 3);
            }
            const auto means = class_means(e, labels);
            MaskVector s{std::vector<double>(dim)};
            for (auto& v : s.raw) {
                v = rng.uniform(-2.0, 2.0);
            }
            const double lambda = rng.uniform(0.0, 0.1);
            const auto r = mask_training_loss(e, labels, means, s, lambda);
            auto fn = [&](std::span<const double> x) {
                return mask_training_loss(e, labels, means, MaskVector{{x.begin(), x.end()}}, lambda).loss;
            };
            worst[3] = std::max(worst[3], relative_error(r.grad, finite_diff_grad(fn, s.raw)));
        }
    }
    const double secs = seconds_since(t0);
    const bool ok = worst[0] <= tol && worst[1] <= tol && worst[2] <= tol && worst[3] <= tol && secs < 120.0;
    return {ok, "max rel err supcon " + fmt("%.2e", worst[0]) + ", ird " + fmt("%.2e", worst[1]) + ", selective " +
                    fmt("%.2e", worst[2]) + ", mask " + fmt("%.2e", worst[3]) + " (tol 1e-5, 20 each), " +
                    fmt("%.1f", secs) + "s"};
}

// --- 2 -------------------------------------------------------------------

Outcome similarity_rows() {
    Rng rng(202);
    double worst = 0.0;
    for (int b = 0; b < 100; ++b) {
        const std::size_t n = 2 + rng.below(30);
        const auto e = unit_rows(n, 1 + rng.below(32), rng);
        const auto r = similarity_matrix(e, rng.uniform(0.01, 2.0));
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                s += r.values(i, j);
            }
            worst = std::max(worst, std::abs(s - 1.0));
        }
    }
    return {worst <= 1e-9, "max |row sum - 1| = " + fmt("%.2e", worst) + " over 100 batches (tol 1e-9)"};
}

// --- 3 -------------------------------------------------------------------

Outcome gibbs() {
    Rng rng(303);
    const auto e = unit_rows(10, 8, rng);
    const double eta = 0.2;
    const auto r = similarity_matrix(e, eta);
    const double at_min = ird_loss(r, e, eta).loss;
    int violations = 0;
    double min_gap = 1e300;
    for (int k = 0; k < 100; ++k) {
        Dense2D p = e;
        const double sd = rng.uniform(0.001, 1.0);
        for (auto& v : p.data()) {
            v += rng.normal(0.0, sd);
        }
        normalize_rows(p);
        const double gap = ird_loss(r, p, eta).loss - at_min;
        min_gap = std::min(min_gap, gap);
        violations += gap < -1e-12 ? 1 : 0;
    }
    return {violations == 0, std::to_string(violations) + " of 100 perturbations below the minimum; smallest gap " +
                                 fmt("%.3e", min_gap)};
}

// --- 4 -------------------------------------------------------------------

RunConfig reduction_config(Method m) {
    RunConfig c;
    c.dataset.classes = 4;
    c.dataset.dim = 8;
    c.dataset.train_per_class = 32;
    c.dataset.test_per_class = 16;
    c.n_tasks = 2;
    c.model.encoder_widths = {16};
    c.model.representation_dim = 16;
    c.model.projection_hidden = 16;
    c.model.embedding_dim = 8;
    c.memory_capacity = 16;
    c.epochs_per_task = 2;
    c.batch_size = 16;
    c.mask.restarts = 2;
    c.mask.epochs = 10;
    c.probe.epochs = 20;
    c.method = m;
    c.seed = 404;
    return c;
}

double trajectory_gap(const MetricsRecord& a, const MetricsRecord& b, std::size_t& steps) {
    steps = std::min(a.steps.size(), b.steps.size());
    if (a.steps.size() != b.steps.size()) {
        return 1e300;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
        worst = std::max(worst, std::abs(a.steps[i].total - b.steps[i].total));
    }
    return worst;
}

Outcome reduction_chain() {
    Rng rng(404);
    double sel_gap = 0.0;
    for (int k = 0; k < 20; ++k) {
        const auto e_old = unit_rows(8, 6, rng);
        const auto e_new = unit_rows(8, 6, rng);
        const IRDConfig cfg{0.2, 0.01};
        const double a = full_ird(e_old, e_new, cfg).loss;
        const double b = selective_ird(e_old, e_new, MaskVector::uniform(6, 3.0), cfg).loss;
        sel_gap = std::max(sel_gap, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
    auto sd = reduction_config(Method::sd);
    sd.force_full_mask = true;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    const auto ird_run = train_continual(reduction_config(Method::ird));
    const double g1 = trajectory_gap(train_continual(sd).record, ird_run.record, n1);
    auto ird0 = reduction_config(Method::ird);
    ird0.distill_weight = 0.0;
    const double g2 =
        trajectory_gap(train_continual(ird0).record, train_continual(reduction_config(Method::finetune)).record, n2);
    const bool ok = sel_gap <= 1e-12 && g1 <= 1e-9 && g2 <= 1e-9 && n1 >= 3 && n2 >= 3;
    return {ok, "selective(full) vs ird " + fmt("%.1e", sel_gap) + " (tol 1e-12); sd(full mask) vs ird " +
                    fmt("%.1e", g1) + " over " + std::to_string(n1) + " steps; ird(k=0) vs finetune " +
                    fmt("%.1e", g2) + " over " + std::to_string(n2) + " steps (tol 1e-9)"};
}

// --- 5 -------------------------------------------------------------------

Outcome eb_conservation() {
    const auto t0 = Clock::now();
    Rng rng(505);
    double worst = 0.0;
    for (int net = 0; net < 20; ++net) {
        std::vector<std::size_t> w{1 + rng.below(32), 1 + rng.below(32), 1 + rng.below(32), 1 + rng.below(32)};
        std::vector<Layer> layers;
        for (std::size_t l = 0; l < 3; ++l) {
            Layer layer{Dense2D(w[l], w[l + 1]), std::vector<double>(w[l + 1], 0.0), Activation::relu};
            for (auto& v : layer.weights.data()) {
                v = rng.uniform(0.01, 1.0);
            }
            layers.push_back(std::move(layer));
        }
        Dense2D x(8, w[0]);
        for (auto& v : x.data()) {
            v = rng.uniform(0.05, 1.0);
        }
        std::vector<Dense2D> inputs;
        Dense2D cur = x;
        for (const auto& l : layers) {
            inputs.push_back(cur);
            cur = forward_linear(l, cur).output;
        }
        std::vector<double> p(w[3]);
        double total = 0.0;
        for (auto& v : p) {
            v = rng.uniform();
            total += v;
        }
        for (auto& v : p) {
            v /= total;
        }
        const auto act = propagate_mwp(layers, inputs, p);
        for (const auto& level : act.levels) {
            double s = 0.0;
            for (double v : level) {
                s += v;
            }
            worst = std::max(worst, std::abs(s - 1.0));
        }
    }

    // Negative-weight connections: a lower neuron wired to the upper one only
    // through a negative weight gets nothing.
    int neg_leaks = 0;
    for (int k = 0; k < 100; ++k) {
        Layer layer{random_matrix(6, 1, rng), {0.0}, Activation::relu};
        std::vector<double> a(6);
        for (auto& v : a) {
            v = rng.uniform(0.1, 1.0);
        }
        const auto lower = mwp_step(layer, a, std::vector<double>{1.0});
        for (std::size_t j = 0; j < 6; ++j) {
            if (layer.weights(j, 0) < 0.0 && lower[j] != 0.0) {
                ++neg_leaks;
            }
        }
    }

    int mod_violations = 0;
    for (int k = 0; k < 100; ++k) {
        ParamGrads g(1);
        g[0].weights = random_matrix(4, 5, rng);
        g[0].bias = random_matrix(1, 5, rng).data();
        ParameterSalience s;
        Dense2D gamma(4, 5);
        for (auto& v : gamma.data()) {
            v = rng.uniform(0.0, 2.0);
        }
        s.weights.push_back(gamma);
        s.bias.push_back(std::vector<double>(5, 0.5));
        const auto before = g;
        modulate_gradients(g, s);
        for (std::size_t i = 0; i < 20; ++i) {
            const double d0 = before[0].weights.data()[i];
            const double d1 = g[0].weights.data()[i];
            if (std::abs(d1) > std::abs(d0) || (gamma.data()[i] >= 1.0 && d1 != 0.0)) {
                ++mod_violations;
            }
        }
    }
    const double secs = seconds_since(t0);
    const bool ok = worst <= 1e-9 && neg_leaks == 0 && mod_violations == 0 && secs < 60.0;
    return {ok, "max |level sum - 1| " + fmt("%.2e", worst) + " on 20 nets; negative-weight leaks " +
                    std::to_string(neg_leaks) + "; modulation violations " + std::to_string(mod_violations) + ", " +
                    fmt("%.1f", secs) + "s"};
}

// --- 6 -------------------------------------------------------------------

Outcome mask_recovery() {
    const auto t0 = Clock::now();
    int good = 0;
    std::string hits;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const auto p = planted_embeddings(rng);
        const auto res = train_salient_mask(p.embeddings, p.labels, MaskTrainConfig{}, rng);
        const auto h = top_hits(res.mask, 10, 10);
        good += h >= 8 ? 1 : 0;
        hits += (seed == 0 ? "" : ",") + std::to_string(h);
    }
    const double secs = seconds_since(t0);
    return {good >= 18 && secs < 180.0, std::to_string(good) + "/20 runs with >=8 of top-10 on informative dims "
                                            "(need 18); hits [" + hits + "], " + fmt("%.1f", secs) + "s"};
}

// --- 7, 8, 10 --------------------------------------------------------------

RunConfig desk_config(Method m, std::uint64_t seed) {
    RunConfig c;
    c.dataset.classes = 10;
    c.dataset.dim = 32;
    c.dataset.train_per_class = 200;
    c.dataset.test_per_class = 100;
    c.n_tasks = 5;
    c.memory_capacity = 100;
    c.epochs_per_task = 20;
    c.method = m;
    c.seed = seed;
    if (m == Method::sd && seed == 0) {
        c.subsets.enabled = true;
        c.subsets.k = 10;
        c.subsets.n = 100;
        c.subsets.max_boundaries = 2;
    }
    return c;
}

struct DeskResults {
    double forgetting[3] = {0, 0, 0};
    double accuracy[3] = {0, 0, 0};
    double secs = 0.0;
    std::vector<SubsetColumn> subsets;
    std::string sd0_dir;
};

DeskResults run_desk(const std::filesystem::path& out) {
    DeskResults r;
    const auto t0 = Clock::now();
    const Method methods[3] = {Method::finetune, Method::ird, Method::sd};
    for (int m = 0; m < 3; ++m) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto dir = out / (std::string("desk_") + to_string(methods[m]) + "_" + std::to_string(seed));
            const auto res = run_to_directory(desk_config(methods[m], seed), dir.string());
            r.forgetting[m] += res.record.mean_forgetting / 5.0;
            r.accuracy[m] += res.record.average_accuracy / 5.0;
            std::printf("  %-8s seed %llu  avg %.4f  forgetting %.4f\n", to_string(methods[m]),
                        static_cast<unsigned long long>(seed), res.record.average_accuracy,
                        res.record.mean_forgetting);
            std::fflush(stdout);
            if (methods[m] == Method::sd && seed == 0) {
                r.subsets = res.record.subsets;
                r.sd0_dir = dir.string();
            }
        }
    }
    r.secs = seconds_since(t0);
    return r;
}

Outcome desk_forgetting(const DeskResults& r) {
    const double ft = r.forgetting[0];
    const double ird = r.forgetting[1];
    const double sd = r.forgetting[2];
    const bool ok = ft > ird && ft > sd && r.accuracy[2] >= r.accuracy[1] - 0.01 && r.secs < 900.0;
    return {ok, "mean forgetting finetune " + fmt("%.4f", ft) + ", ird " + fmt("%.4f", ird) + ", sd " +
                    fmt("%.4f", sd) + "; avg acc ird " + fmt("%.4f", r.accuracy[1]) + ", sd " +
                    fmt("%.4f", r.accuracy[2]) + " (need sd >= ird - 0.01); " + fmt("%.0f", r.secs) + "s"};
}

Outcome subset_table(const DeskResults& r) {
    if (r.subsets.size() != 2) {
        return {false, "expected 2 subset columns, got " + std::to_string(r.subsets.size())};
    }
    std::printf("%s", format_subset_table(r.subsets).c_str());
    std::string flags;
    for (const auto& c : r.subsets) {
        flags += " boundary_" + std::to_string(c.boundary) +
                 " std_future_gt_std_past=" + (c.future_std > c.past_std ? "yes" : "no");
    }
    return {true, "table emitted (sd, seed 0, k=10, n=100);" + flags};
}

Outcome determinism(const DeskResults& r, const std::filesystem::path& out) {
    const auto again = out / "desk_sd_0_rerun";
    run_to_directory(desk_config(Method::sd, 0), again.string());
    const auto a = io::read_file((std::filesystem::path(r.sd0_dir) / "summary.csv").string());
    const auto b = io::read_file((again / "summary.csv").string());
    return {a == b && !a.empty(), std::string(a == b ? "identical" : "different") + " summary.csv (" +
                                      std::to_string(a.size()) + " bytes) across two sd seed-0 runs"};
}

// --- 9 -------------------------------------------------------------------

Outcome buffer_invariants() {
    Rng rng(909);
    const auto src = SyntheticSource::create(12, 8, 4.0, rng);
    const auto data = src.draw(60, rng);
    const auto stream = split_by_class(data, 6);
    int violations = 0;
    int rebalances = 0;
    for (std::size_t cap : {12u, 37u, 100u, 200u, 599u}) {
        ReplayBuffer b(cap, cap);
        for (const auto& t : stream.tasks) {
            std::vector<StoredSample> s;
            for (std::size_t i = 0; i < t.train.size(); ++i) {
                const auto row = t.train.inputs.row(i);
                s.push_back({{row.begin(), row.end()}, t.train.labels[i], t.train.labels[i], t.id});
            }
            b.rebalance_after_task(s);
            ++rebalances;
            std::size_t lo = SIZE_MAX;
            std::size_t hi = 0;
            for (const auto& [k, n] : b.counts()) {
                lo = std::min(lo, n);
                hi = std::max(hi, n);
            }
            violations += (hi - lo > 1 || b.size() > cap) ? 1 : 0;
        }
    }
    return {violations == 0,
            std::to_string(violations) + " violations over " + std::to_string(rebalances) + " rebalances (6 tasks)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string out = "acceptance_runs";
    app.add_option("--out", out, "directory for run outputs");
    CLI11_PARSE(app, argc, argv);
    std::filesystem::create_directories(out);

    int failed = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::printf("criterion %d %s: %s | %s\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    };

    report(1, "gradient suite", gradient_suite);
    report(2, "similarity rows", similarity_rows);
    report(3, "gibbs", gibbs);
    report(4, "reduction chain", reduction_chain);
    report(5, "excitation backprop", eb_conservation);
    report(6, "mask recovery", mask_recovery);

    DeskResults desk;
    bool desk_ok = true;
    std::string desk_error;
    try {
        desk = run_desk(out);
    } catch (const std::exception& e) {
        desk_ok = false;
        desk_error = e.what();
    }
    auto need_desk = [&](const std::function<Outcome()>& fn) {
        return [&, fn]() { return desk_ok ? fn() : Outcome{false, "desk runs failed: " + desk_error}; };
    };
    report(7, "desk forgetting", need_desk([&] { return desk_forgetting(desk); }));
    report(8, "subset table", need_desk([&] { return subset_table(desk); }));
    report(9, "buffer invariants", buffer_invariants);
    report(10, "determinism", need_desk([&] { return determinism(desk, out); }));

    std::printf("%d of 10 criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
