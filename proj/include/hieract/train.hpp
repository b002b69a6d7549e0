#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hieract/context.hpp"
#include "hieract/data.hpp"
#include "hieract/dataset.hpp"
#include "hieract/model.hpp"

namespace hieract {

struct TrainConfig {
    double base_lr = 5e-5;
    double weight_decay = 0.1;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::size_t warmup_epochs = 5;
    std::size_t patience = 20;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class ContextMode { ground_truth, predicted, none };

std::string_view to_string(ContextMode m);
ContextMode parse_context_mode(std::string_view s);

struct ContextSettings {
    std::size_t n_past = 5;
    bool include_location = true;
    std::string template_version = "v1";

    void validate() const;
};

/// Model-ready tensors for one sample. The text slot holds the embedding of
/// the annotated context.
struct PreparedSample {
    Sample sample;
    Tensor rgb;  // n_blocks x raw_dim_rgb, undefined when unused
    Tensor flow; // n_blocks x raw_dim_flow, undefined when unused
    Tensor ground_truth_text;
    Tensor y_fine;
    Tensor y_coarse;
};

/// Resolves features and renders prompts for a fixed model configuration.
class InputPreparer {
public:
    /// `embedder` may be null only for text-free models.
    InputPreparer(const ModelConfig& model, const LabelSpace& labels, const FeatureStore& features,
                  const TextEmbedder* embedder, ContextSettings context);

    /// Throws MissingIdError naming the sample when features are absent.
    std::vector<PreparedSample> prepare(const std::vector<Sample>& samples) const;
    /// Prompt for a sample given fine indices of its prior actions, oldest first.
    std::string prompt(const Sample& sample, const std::vector<std::size_t>& prior) const;
    Tensor embed(const std::string& text) const;

    bool uses_text() const { return model_.modalities.text; }
    const LabelSpace& labels() const { return *labels_; }
    const ContextSettings& context() const { return context_; }

private:
    ModelConfig model_;
    const LabelSpace* labels_;
    const FeatureStore* features_;
    const TextEmbedder* embedder_;
    ContextSettings context_;
};

struct Scores {
    std::vector<float> fine;
    std::vector<float> coarse; // empty without a coarse head
};

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual bool uses_text() const = 0;
    /// `text` is undefined for text-free predictors.
    virtual Scores predict(const PreparedSample& sample, const Tensor& text) const = 0;
};

class ModelPredictor final : public Predictor {
public:
    explicit ModelPredictor(const Model<float>& model) : model_(&model) {}
    bool uses_text() const override { return model_->config().modalities.text; }
    Scores predict(const PreparedSample& sample, const Tensor& text) const override;

private:
    const Model<float>* model_;
};

struct TopKRow {
    std::size_t k = 1;
    double fine = 0.0;                 // defining label in the top k
    double fine_any = 0.0;             // any overlapping label in the top k
    std::optional<double> coarse;      // coarse class of the defining label in the top k
};

struct EvalMetrics {
    std::size_t n_samples = 0;
    std::vector<TopKRow> rows;

    const TopKRow& at(std::size_t k) const;
};

/// Scores samples under a context mode. Predicted mode walks each video in
/// chronological order and builds prompts from the top-1 fine predictions
/// of earlier segments. k above a head's class count is clamped.
EvalMetrics evaluate(const Predictor& predictor, const std::vector<PreparedSample>& samples,
                     const InputPreparer& preparer, std::span<const std::size_t> ks, ContextMode mode);

struct FitResult {
    std::vector<double> loss_curve;       // mean train loss per epoch
    std::vector<double> validation_top1;  // ground-truth-context fine top-1 per epoch
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
};

/// Mini-batch training with warmup, clipping, AdamW and early stopping on
/// validation fine top-1. The model ends holding the best epoch's weights.
FitResult fit(Model<float>& model, const std::vector<PreparedSample>& train,
              const std::vector<PreparedSample>& validation, const InputPreparer& preparer, const TrainConfig& cfg);

/// Mean joint loss over samples with ground-truth context, no gradients.
double mean_loss(const Model<float>& model, const std::vector<PreparedSample>& samples);

} // namespace hieract
