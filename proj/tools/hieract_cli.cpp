#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hieract/ablation.hpp"
#include "hieract/checkpoint.hpp"
#include "hieract/context.hpp"
#include "hieract/data.hpp"
#include "hieract/dataset.hpp"
#include "hieract/errors.hpp"
#include "hieract/experiment.hpp"
#include "hieract/gradcheck.hpp"
#include "hieract/haf1.hpp"
#include "hieract/labels.hpp"
#include "hieract/train.hpp"

namespace fs = std::filesystem;
using namespace hieract;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

/// --out wins, then HIERACT_RUN_DIR, then ./runs.
fs::path output_root(const std::string& out_flag) {
    if (!out_flag.empty()) {
        return out_flag;
    }
    if (const char* env = std::getenv("HIERACT_RUN_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "runs";
}

void write_text(const fs::path& path, const std::string& text) {
    write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
    std::vector<std::size_t> ks;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        try {
            std::size_t used = 0;
            long long k = std::stoll(part, &used);
            if (used != part.size() || k <= 0) {
                throw std::invalid_argument(part);
            }
            ks.push_back(static_cast<std::size_t>(k));
        } catch (const std::exception&) {
            throw ConfigError("--k expects a comma list of positive integers, got '" + text + "'");
        }
    }
    if (ks.empty()) {
        throw ConfigError("--k expects at least one value");
    }
    return ks;
}

ExperimentConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
    auto cfg = load_experiment_config(path);
    if (seed) {
        cfg.seed = *seed;
        cfg.train.seed = *seed;
    }
    cfg.validate();
    return cfg;
}

void print_report(const MetricsReport& r) {
    auto pct = [](double v) { return v * 100.0; };
    std::printf("context=%s  n=%zu  best_epoch=%zu  epochs_run=%zu\n", std::string(to_string(r.context_mode)).c_str(),
                r.eval.n_samples, r.best_epoch, r.epochs_run);
    for (const auto& row : r.eval.rows) {
        std::printf("  top-%zu  fine %.2f%%  (any-label %.2f%%)", row.k, pct(row.fine), pct(row.fine_any));
        if (row.coarse) {
            std::printf("  coarse %.2f%%", pct(*row.coarse));
        }
        std::printf("\n");
    }
}

int cmd_synth(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed) {
    SynthSpec spec;
    if (!config.empty()) {
        std::ifstream in(config);
        if (!in) {
            throw ConfigError("cannot open " + config);
        }
        auto doc = nlohmann::json::parse(in);
        if (doc.contains("data")) {
            auto exp = experiment_from_json(doc);
            if (!exp.synth) {
                throw ConfigError(config + ": experiment config has no data.synth section");
            }
            spec = *exp.synth;
        } else {
            spec = synth_from_json(doc);
        }
    }
    if (seed) {
        spec.seed = *seed;
    }
    auto result = synth_dataset(spec);
    fs::path dir = output_root(out);
    save_dataset(dir, result.dataset);
    auto samples = build_samples(result.dataset.videos, result.dataset.labels, 7);
    std::size_t consistent = 0;
    for (const auto& s : samples) {
        consistent += hierarchy_consistent(s, result.dataset.labels) ? 1 : 0;
    }
    std::printf("wrote %zu videos, %zu samples (%zu fine / %zu coarse classes) to %s\n", result.dataset.videos.size(),
                samples.size(), result.dataset.labels.n_fine(), result.dataset.labels.n_coarse(), dir.c_str());
    std::printf("hierarchy consistency: %zu/%zu samples\n", consistent, samples.size());
    return consistent == samples.size() ? 0 : kExitCheckFailed;
}

int cmd_build_dataset(const std::string& annotations, const std::string& mapping, const std::string& out,
                      std::size_t n_past, bool include_location, const std::string& template_version) {
    auto videos = load_annotations(annotations);
    std::set<std::string> used;
    for (const auto& v : videos) {
        for (const auto& e : v.events) {
            used.insert(e.label);
        }
    }
    std::vector<std::string> vocabulary(used.begin(), used.end());
    auto labels = load_mapping_csv(mapping, &vocabulary);
    auto samples = build_samples(videos, labels, n_past);

    PromptContext ctx;
    ctx.n_requested = n_past;
    nlohmann::ordered_json prompts = nlohmann::ordered_json::object();
    std::size_t consistent = 0;
    for (const auto& s : samples) {
        ctx.location = s.location;
        ctx.past_actions.clear();
        for (auto p : s.prior_actions) {
            ctx.past_actions.push_back(humanize_label(labels.fine_name(p)));
        }
        prompts[s.sample_id] = build_prompt(ctx, include_location, template_version);
        consistent += hierarchy_consistent(s, labels) ? 1 : 0;
    }
    fs::path dir = output_root(out);
    write_text(dir / "samples.json", format_sample_manifest(samples, labels));
    write_text(dir / "prompts.json", prompts.dump(2) + "\n");
    write_text(dir / "mapping.csv", format_mapping_csv(labels));
    std::printf("wrote %zu samples from %zu videos to %s\n", samples.size(), videos.size(), dir.c_str());
    std::printf("hierarchy consistency: %zu/%zu samples\n", consistent, samples.size());
    return consistent == samples.size() ? 0 : kExitCheckFailed;
}

int cmd_train(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed) {
    auto cfg = load_config(config, seed);
    Experiment exp(cfg);
    fs::path run = output_root(out) / exp.digest();
    write_text(run / "config.json", to_json(cfg).dump(2) + "\n");
    auto model = exp.make_model();
    std::printf("run %s: %zu train / %zu test samples, %zu parameters\n", exp.digest().c_str(), exp.train_set().size(),
                exp.test_set().size(), model.parameters().total_elements());
    auto report = exp.run(model);
    save_checkpoint(run / "checkpoint", model.parameters(), exp.digest());
    write_text(run / "metrics.json", report.to_json().dump(2) + "\n");
    print_report(report);
    std::printf("artifacts in %s\n", run.c_str());
    return 0;
}

int cmd_eval(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed,
             const std::string& checkpoint, const std::string& mode_text, const std::string& k_text) {
    auto cfg = load_config(config, seed);
    auto mode = mode_text.empty() ? cfg.eval_context : parse_context_mode(mode_text);
    auto ks = k_text.empty() ? std::vector<std::size_t>{} : parse_k_list(k_text);
    if (mode == ContextMode::predicted && !cfg.model.modalities.text) {
        throw ConfigError("context mode 'predicted' needs a model with the text modality (this config uses '" +
                          cfg.model.modalities.to_string() + "')");
    }
    Experiment exp(cfg);
    fs::path run = output_root(out) / exp.digest();
    fs::path ckpt = checkpoint.empty() ? run / "checkpoint" : fs::path(checkpoint);
    auto model = exp.make_model();
    load_checkpoint(ckpt, model.parameters(), exp.digest());
    auto report = exp.evaluate(model, mode, ks);
    write_text(run / ("eval_" + std::string(to_string(mode)) + ".json"), report.to_json().dump(2) + "\n");
    print_report(report);
    return 0;
}

int cmd_gradcheck(const std::optional<std::uint64_t>& seed) {
    GradcheckOptions options;
    if (seed) {
        options.seed = *seed;
    }
    auto rows = gradcheck_suite(options);
    bool ok = true;
    std::printf("%-34s %10s %14s  %s\n", "check", "elements", "max rel err", "status");
    for (const auto& r : rows) {
        std::printf("%-34s %10zu %14.3e  %s\n", r.name.c_str(), r.n_checked, r.max_rel_error,
                    r.passed() ? "pass" : "FAIL");
        ok = ok && r.passed();
    }
    std::printf("%s: %zu checks, tolerance %.0e, eps %.0e\n", ok ? "PASS" : "FAIL", rows.size(), options.tolerance,
                options.eps);
    return ok ? 0 : kExitCheckFailed;
}

int cmd_ablate(const std::string& config, const std::string& grid_path, const std::string& out,
               const std::optional<std::uint64_t>& seed) {
    auto base = load_config(config, seed);
    std::ifstream in(grid_path);
    if (!in) {
        throw ConfigError("cannot open grid " + grid_path);
    }
    nlohmann::ordered_json grid;
    try {
        grid = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(grid_path + ": " + e.what());
    }
    auto axes = parse_ablation_grid(grid);
    auto cells = run_ablation(base, axes, [](const AblationCell& c) {
        std::printf("  %-48s fine top-1 %.4f\n", c.label.c_str(), c.report.fine_top(1));
        std::fflush(stdout);
    });
    auto table = format_ablation_table(cells);
    fs::path dir = output_root(out) / ("ablation-" + config_digest(base));
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& c : cells) {
        rows.push_back({{"cell", c.label}, {"config", to_json(c.config)}, {"metrics", c.report.to_json()}});
    }
    write_text(dir / "table.md", table);
    write_text(dir / "cells.json", rows.dump(2) + "\n");
    std::printf("\n%s\nartifacts in %s\n", table.c_str(), dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical multimodal action recognition"};
    app.require_subcommand(1);

    std::string config, out, checkpoint, context_mode, k_list, annotations, mapping, grid, template_version = "v1";
    std::optional<std::uint64_t> seed;
    std::size_t n_past = 5;
    bool no_location = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config, "configuration file (JSON)");
        if (needs_config) {
            opt->required();
        }
        cmd->add_option("--out", out, "output root (default: $HIERACT_RUN_DIR or ./runs)");
        cmd->add_option("--seed", seed, "override the configured seed");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, false);
    auto* build = app.add_subcommand("build-dataset", "build trimmed samples from annotations");
    build->add_option("--annotations", annotations, "annotation file (JSON)")->required();
    build->add_option("--mapping", mapping, "fine_label,coarse_label mapping file")->required();
    build->add_option("--out", out, "output directory");
    build->add_option("--n-past", n_past, "prior actions per prompt")->check(CLI::PositiveNumber);
    build->add_option("--template", template_version, "prompt template version");
    build->add_flag("--no-location", no_location, "omit the location from prompts");
    auto* train = app.add_subcommand("train", "train and evaluate one configuration");
    add_common(train, true);
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, true);
    eval->add_option("--checkpoint", checkpoint, "checkpoint directory (default: run directory)");
    eval->add_option("--context-mode", context_mode, "ground_truth | predicted | none");
    eval->add_option("--k", k_list, "comma list of k values (default 1,5)");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradcheck->add_option("--seed", seed, "seed for random inputs");
    auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
    add_common(ablate, true);
    ablate->add_option("--grid", grid, "grid file (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(config, out, seed);
        if (*build) return cmd_build_dataset(annotations, mapping, out, n_past, !no_location, template_version);
        if (*train) return cmd_train(config, out, seed);
        if (*eval) return cmd_eval(config, out, seed, checkpoint, context_mode, k_list);
        if (*gradcheck) return cmd_gradcheck(seed);
        if (*ablate) return cmd_ablate(config, grid, out, seed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitCheckFailed;
    }
    return 0;
}
