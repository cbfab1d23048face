#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lasp/lasp.hpp"

namespace {

using lasp::RunConfig;

RunConfig resolve_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                         const std::string& method, const std::string& dsrs) {
    RunConfig cfg = lasp::load_run_config(path);
    if (seed) {
        cfg.seed = *seed;
    }
    if (!method.empty()) {
        cfg.method = lasp::parse_method(method);
    }
    if (!dsrs.empty()) {
        cfg.dsrs = lasp::parse_dsrs(dsrs);
    }
    cfg.validate();
    return cfg;
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto token = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (token.empty()) {
            throw lasp::ConfigError("empty entry in --sizes '" + list + "'");
        }
        try {
            std::size_t used = 0;
            const auto v = std::stoull(token, &used);
            if (used != token.size()) {
                throw std::invalid_argument(token);
            }
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
            throw lasp::ConfigError("bad size '" + token + "' in --sizes");
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lasp: contrastive continual learning with selective distillation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string checkpoint_path;
    std::string out_dir = "run";
    std::string method;
    std::string dsrs;
    std::optional<std::uint64_t> seed;
    std::size_t k = 10;
    std::size_t n = 100;
    std::vector<std::size_t> boundaries;
    std::string sizes = "8,32,128";
    std::optional<std::size_t> seeds;
    std::string sweep_out;

    auto* train = app.add_subcommand("train", "run the continual-learning loop");
    train->add_option("--config", config_path, "run config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--seed", seed, "override the config seed");
    train->add_option("--out", out_dir, "output directory")->capture_default_str();
    train->add_option("--method", method, "finetune, ird, sd, gm or sd_gm");
    train->add_option("--dsrs", dsrs, "onlypast, onlycurrent or combined");

    auto* eval = app.add_subcommand("eval", "evaluate a saved checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint.bin")->required()->check(CLI::ExistingFile);
    eval->add_option("--config", config_path, "run config (defaults to the one stored in the checkpoint)")
        ->check(CLI::ExistingFile);

    auto* analyze = app.add_subcommand("analyze-subsets", "random embedding-subset probe analysis");
    analyze->add_option("--checkpoint", checkpoint_path, "checkpoint.bin")->required()->check(CLI::ExistingFile);
    analyze->add_option("--config", config_path, "run config (defaults to the one stored in the checkpoint)")
        ->check(CLI::ExistingFile);
    analyze->add_option("--k", k, "subset size")->capture_default_str();
    analyze->add_option("--n", n, "number of subsets")->capture_default_str();
    analyze->add_option("--boundary", boundaries, "boundary task index (repeatable; default all)");

    auto* sweep = app.add_subcommand("sweep", "embedding-size sweep of sd against ird");
    sweep->add_option("--config", config_path, "base run config (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--sizes", sizes, "comma-separated embedding sizes")->capture_default_str();
    sweep->add_option("--seeds", seeds, "seeds per (size, method)");
    sweep->add_option("--dsrs", dsrs, "onlypast, onlycurrent or combined");
    sweep->add_option("--out", sweep_out, "write the CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto cfg = resolve_config(config_path, seed, method, dsrs);
            const auto r = lasp::run_to_directory(cfg, out_dir);
            std::printf("method=%s seed=%llu average_accuracy=%.4f mean_forgetting=%.4f out=%s\n",
                        lasp::to_string(cfg.method), static_cast<unsigned long long>(cfg.seed),
                        r.record.average_accuracy, r.record.mean_forgetting, out_dir.c_str());
        } else if (*eval || *analyze) {
            const auto ck = lasp::load_checkpoint(checkpoint_path);
            RunConfig cfg;
            if (!config_path.empty()) {
                cfg = lasp::load_run_config(config_path);
            } else if (ck.config) {
                cfg = *ck.config;
            } else {
                throw lasp::ConfigError("checkpoint has no stored config; pass --config");
            }
            if (*eval) {
                const auto res = lasp::evaluate_checkpoint(ck, cfg);
                const nlohmann::json j{{"class_il", res.class_il},
                                       {"task_il", res.task_il},
                                       {"domain_il", res.domain_il},
                                       {"average", res.average}};
                std::cout << j.dump(2) << "\n";
            } else {
                const auto cols = lasp::analyze_checkpoint(ck, cfg, k, n, boundaries);
                std::cout << lasp::format_subset_table(cols);
                for (const auto& c : cols) {
                    std::cout << "boundary_" << c.boundary << " std_future_gt_std_past="
                              << (c.future_std > c.past_std ? "yes" : "no") << "\n";
                }
            }
        } else if (*sweep) {
            auto cfg = resolve_config(config_path, std::nullopt, "", dsrs);
            if (seeds) {
                cfg.seeds = *seeds;
            }
            const auto csv = lasp::sweep_csv(lasp::sweep_embedding_size(cfg, parse_sizes(sizes)));
            if (sweep_out.empty()) {
                std::cout << csv;
            } else {
                lasp::io::write_file(sweep_out, std::vector<std::uint8_t>(csv.begin(), csv.end()));
            }
        }
    } catch (const lasp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const lasp::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
