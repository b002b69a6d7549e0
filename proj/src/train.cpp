#include "hieract/train.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

#include "hieract/errors.hpp"
#include "hieract/optim.hpp"
#include "hieract/random.hpp"

namespace hieract {

void TrainConfig::validate() const {
    if (!(base_lr > 0.0) || weight_decay < 0.0 || !(clip_norm > 0.0)) {
        throw ConfigError("train: base_lr and clip_norm must be positive, weight_decay non-negative");
    }
    if (epochs == 0 || batch_size == 0 || patience == 0) {
        throw ConfigError("train: epochs, batch_size and patience must be positive");
    }
    if (warmup_epochs >= epochs) {
        throw ConfigError("train: warmup_epochs (" + std::to_string(warmup_epochs) + ") must be below epochs (" +
                          std::to_string(epochs) + ")");
    }
}

std::string_view to_string(ContextMode m) {
    switch (m) {
    case ContextMode::ground_truth:
        return "ground_truth";
    case ContextMode::predicted:
        return "predicted";
    case ContextMode::none:
        return "none";
    }
    return "?";
}

ContextMode parse_context_mode(std::string_view s) {
    if (s == "ground_truth") return ContextMode::ground_truth;
    if (s == "predicted") return ContextMode::predicted;
    if (s == "none") return ContextMode::none;
    throw ConfigError("context mode must be ground_truth|predicted|none, got '" + std::string(s) + "'");
}

void ContextSettings::validate() const {
    if (n_past == 0) {
        throw ConfigError("context n_past must be >= 1");
    }
    auto versions = prompt_template_versions();
    if (std::find(versions.begin(), versions.end(), template_version) == versions.end()) {
        throw ConfigError("unknown prompt template '" + template_version + "'");
    }
}

InputPreparer::InputPreparer(const ModelConfig& model, const LabelSpace& labels, const FeatureStore& features,
                             const TextEmbedder* embedder, ContextSettings context)
    : model_(model), labels_(&labels), features_(&features), embedder_(embedder), context_(std::move(context)) {
    context_.validate();
    if (model_.modalities.text) {
        if (embedder_ == nullptr) {
            throw ConfigError("a text modality needs a text embedder");
        }
        if (embedder_->dim() != model_.text_dim) {
            throw ConfigError("text embedder dim " + std::to_string(embedder_->dim()) + " does not match text_dim " +
                              std::to_string(model_.text_dim));
        }
    }
    if (labels.n_fine() != model_.n_fine || labels.n_coarse() != model_.n_coarse) {
        throw ConfigError("model expects " + std::to_string(model_.n_fine) + "/" + std::to_string(model_.n_coarse) +
                          " classes but the label space has " + std::to_string(labels.n_fine()) + "/" +
                          std::to_string(labels.n_coarse()));
    }
}

std::string InputPreparer::prompt(const Sample& sample, const std::vector<std::size_t>& prior) const {
    PromptContext ctx;
    ctx.location = sample.location;
    ctx.n_requested = context_.n_past;
    for (auto f : prior) {
        ctx.past_actions.push_back(humanize_label(labels_->fine_name(f)));
    }
    return build_prompt(ctx, context_.include_location, context_.template_version);
}

Tensor InputPreparer::embed(const std::string& text) const {
    if (embedder_ == nullptr) {
        throw ConfigError("no text embedder configured");
    }
    return Tensor::from_vector(embedder_->embed(text), {embedder_->dim()});
}

std::vector<PreparedSample> InputPreparer::prepare(const std::vector<Sample>& samples) const {
    std::vector<PreparedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        PreparedSample p;
        p.sample = s;
        auto blocks = [&](Modality m) {
            const Tensor& raw = features_->get(m, s.sample_id);
            if (raw.dim(1) != model_.video.raw_dim(m)) {
                throw DimensionError("sample '" + s.sample_id + "': " + std::string(to_string(m)) + " features have width " +
                                     std::to_string(raw.dim(1)) + ", config expects " +
                                     std::to_string(model_.video.raw_dim(m)));
            }
            return chunk_blocks(m, raw, model_.video.block_size, model_.video.n_blocks, model_.video.fps).blocks;
        };
        if (model_.modalities.rgb) {
            p.rgb = blocks(Modality::rgb);
        }
        if (model_.modalities.flow) {
            p.flow = blocks(Modality::flow);
        }
        if (model_.modalities.text) {
            p.ground_truth_text = embed(prompt(s, s.prior_actions));
        }
        p.y_fine = Tensor::from_vector(s.y_fine, {s.y_fine.size()});
        p.y_coarse = Tensor::from_vector(s.y_coarse, {s.y_coarse.size()});
        out.push_back(std::move(p));
    }
    return out;
}

Scores ModelPredictor::predict(const PreparedSample& sample, const Tensor& text) const {
    NoGradGuard guard;
    auto logits = model_->forward({sample.rgb, sample.flow, text});
    Scores s;
    s.fine = logits.fine.to_vector();
    if (logits.has_coarse()) {
        s.coarse = logits.coarse.to_vector();
    }
    return s;
}

const TopKRow& EvalMetrics::at(std::size_t k) const {
    for (const auto& r : rows) {
        if (r.k == k) {
            return r;
        }
    }
    throw MissingIdError("no metrics for k=" + std::to_string(k));
}

EvalMetrics evaluate(const Predictor& predictor, const std::vector<PreparedSample>& samples,
                     const InputPreparer& preparer, std::span<const std::size_t> ks, ContextMode mode) {
    if (mode == ContextMode::predicted && !predictor.uses_text()) {
        throw ConfigError("context mode 'predicted' needs a model with the text modality");
    }
    if (ks.empty()) {
        throw ConfigError("evaluate: empty k list");
    }
    for (auto k : ks) {
        if (k == 0) {
            throw ConfigError("evaluate: k must be >= 1");
        }
    }
    std::vector<Scores> scores(samples.size());
    if (mode == ContextMode::predicted) {
        std::map<std::string, std::vector<std::size_t>> by_video;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            by_video[samples[i].sample.video_id].push_back(i);
        }
        const auto& labels = preparer.labels();
        for (auto& [video, idx] : by_video) {
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                const auto& x = samples[a].sample;
                const auto& y = samples[b].sample;
                return std::tie(x.start, labels.fine_name(x.defining_label), x.end, x.sample_id) <
                       std::tie(y.start, labels.fine_name(y.defining_label), y.end, y.sample_id);
            });
            std::vector<Event> predicted;
            std::vector<std::size_t> predicted_fine;
            for (auto i : idx) {
                const auto& s = samples[i].sample;
                std::vector<std::size_t> prior;
                for (auto p : prior_event_indices(predicted, s.start, preparer.context().n_past)) {
                    prior.push_back(predicted_fine[p]);
                }
                scores[i] = predictor.predict(samples[i], preparer.embed(preparer.prompt(s, prior)));
                auto top = predict_topk(std::span<const float>(scores[i].fine), 1).front();
                predicted.push_back({labels.fine_name(top), s.start, s.end});
                predicted_fine.push_back(top);
            }
        }
    } else {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            Tensor text;
            if (predictor.uses_text()) {
                text = mode == ContextMode::ground_truth ? samples[i].ground_truth_text
                                                         : preparer.embed(preparer.prompt(samples[i].sample, {}));
            }
            scores[i] = predictor.predict(samples[i], text);
        }
    }

    EvalMetrics m;
    m.n_samples = samples.size();
    const auto& labels = preparer.labels();
    for (auto k : ks) {
        TopKRow row;
        row.k = k;
        std::size_t fine = 0, any = 0, coarse = 0, coarse_n = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i].sample;
            const auto& sc = scores[i];
            auto top = predict_topk(std::span<const float>(sc.fine), std::min(k, sc.fine.size()));
            fine += std::find(top.begin(), top.end(), s.defining_label) != top.end() ? 1 : 0;
            any += std::any_of(top.begin(), top.end(), [&](std::size_t f) { return s.y_fine[f] != 0.0f; }) ? 1 : 0;
            if (!sc.coarse.empty()) {
                auto ctop = predict_topk(std::span<const float>(sc.coarse), std::min(k, sc.coarse.size()));
                auto target = labels.coarse_of(s.defining_label);
                coarse += std::find(ctop.begin(), ctop.end(), target) != ctop.end() ? 1 : 0;
                ++coarse_n;
            }
        }
        const double n = samples.empty() ? 1.0 : static_cast<double>(samples.size());
        row.fine = static_cast<double>(fine) / n;
        row.fine_any = static_cast<double>(any) / n;
        if (coarse_n == samples.size() && coarse_n > 0) {
            row.coarse = static_cast<double>(coarse) / n;
        }
        m.rows.push_back(row);
    }
    return m;
}

double mean_loss(const Model<float>& model, const std::vector<PreparedSample>& samples) {
    NoGradGuard guard;
    double total = 0.0;
    for (const auto& s : samples) {
        auto logits = model.forward({s.rgb, s.flow, s.ground_truth_text});
        total += joint_loss(logits, s.y_fine, s.y_coarse).item();
    }
    return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

FitResult fit(Model<float>& model, const std::vector<PreparedSample>& train,
              const std::vector<PreparedSample>& validation, const InputPreparer& preparer, const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty() || validation.empty()) {
        throw ConfigError("fit: training and validation sets must be nonempty");
    }
    auto& store = model.parameters();
    AdamW<float> optimizer(store, AdamWConfig{cfg.weight_decay});
    Rng shuffle_rng(derive_seed(cfg.seed, "fit.shuffle"));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    FitResult result;
    std::vector<float> best;
    double best_top1 = -1.0;
    const std::size_t k1 = 1;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg.base_lr, cfg.warmup_epochs);
        shuffle_rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            store.zero_grad();
            for (std::size_t j = begin; j < end; ++j) {
                const auto& s = train[order[j]];
                auto logits = model.forward({s.rgb, s.flow, s.ground_truth_text});
                auto loss = joint_loss(logits, s.y_fine, s.y_coarse);
                backward(loss);
                epoch_loss += loss.item();
            }
            const float inv = 1.0f / static_cast<float>(end - begin);
            for (auto& p : store.items()) {
                for (auto& g : p.tensor.mutable_grad()) {
                    g *= inv;
                }
            }
            clip_gradients(store, cfg.clip_norm);
            optimizer.step(lr);
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(train.size()));
        ModelPredictor predictor(model);
        double top1 = evaluate(predictor, validation, preparer, std::span(&k1, 1), ContextMode::ground_truth).at(1).fine;
        result.validation_top1.push_back(top1);
        result.epochs_run = epoch + 1;
        if (top1 > best_top1) {
            best_top1 = top1;
            result.best_epoch = epoch;
            best = store.snapshot();
        }
        if (epoch - result.best_epoch >= cfg.patience) {
            break;
        }
    }
    store.restore(best);
    return result;
}

} // namespace hieract
