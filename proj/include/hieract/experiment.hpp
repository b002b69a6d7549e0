#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hieract/context.hpp"
#include "hieract/dataset.hpp"
#include "hieract/model.hpp"
#include "hieract/train.hpp"

namespace hieract {

/// Everything that determines a run. n_fine / n_coarse come from the
/// dataset's label space, not from the file.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string dataset_dir;        // used when synth is empty
    std::optional<SynthSpec> synth; // generate the dataset in memory instead
    std::uint64_t text_seed = 7;    // hashing text embedder
    ModelConfig model;
    TrainConfig train;
    ContextSettings context;
    ContextMode eval_context = ContextMode::ground_truth;
    std::vector<std::size_t> ks = {1, 5};

    void validate() const;
};

/// Fixed-order JSON with every field present.
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are a ConfigError naming
/// the full key path.
ExperimentConfig experiment_from_json(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

nlohmann::ordered_json synth_to_json(const SynthSpec& spec);
SynthSpec synth_from_json(const nlohmann::json& doc);

/// Canonical serialization: compact dump of to_json.
std::string canonical_config(const ExperimentConfig& cfg);
/// 16 hex digits of FNV-1a 64 over the canonical serialization.
std::string config_digest(const ExperimentConfig& cfg);

struct MetricsReport {
    std::vector<double> loss_curve;
    std::vector<double> validation_top1;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    EvalMetrics eval;
    ContextMode context_mode = ContextMode::ground_truth;
    std::string config_digest;
    std::uint64_t seed = 0;

    nlohmann::ordered_json to_json() const;
    double fine_top(std::size_t k) const { return eval.at(k).fine; }
};

/// A configured dataset plus the helpers that turn it into model inputs.
class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg);
    /// Reuse an already loaded dataset.
    Experiment(ExperimentConfig cfg, std::shared_ptr<const Dataset> dataset);

    const ExperimentConfig& config() const { return cfg_; }
    /// Model config completed with the dataset's class counts.
    const ModelConfig& model_config() const { return model_cfg_; }
    const Dataset& dataset() const { return *dataset_; }
    std::shared_ptr<const Dataset> shared_dataset() const { return dataset_; }
    const std::vector<Sample>& samples() const { return samples_; }
    const Split& split() const { return split_; }
    const InputPreparer& preparer() const { return *preparer_; }
    const std::vector<PreparedSample>& train_set() const { return train_; }
    const std::vector<PreparedSample>& test_set() const { return test_; }
    std::string digest() const { return config_digest(cfg_); }

    Model<float> make_model() const;
    /// fit on the train split (validating on the test split), then evaluate.
    MetricsReport run(Model<float>& model) const;
    /// Empty `ks` uses the configured list; k = 1 and 5 are always added.
    MetricsReport evaluate(const Model<float>& model, ContextMode mode, std::vector<std::size_t> ks = {}) const;

private:
    void init();

    ExperimentConfig cfg_;
    ModelConfig model_cfg_;
    std::shared_ptr<const Dataset> dataset_;
    std::unique_ptr<TextEmbedder> embedder_;
    std::unique_ptr<InputPreparer> preparer_;
    std::vector<Sample> samples_;
    Split split_;
    std::vector<PreparedSample> train_;
    std::vector<PreparedSample> test_;
};

std::shared_ptr<const Dataset> load_experiment_dataset(const ExperimentConfig& cfg);

} // namespace hieract
