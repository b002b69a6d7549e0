#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hieract/fusion.hpp"
#include "hieract/labels.hpp"
#include "hieract/parameter.hpp"
#include "hieract/video.hpp"

namespace hieract {

enum class HierarchyStrategy { contextual_data, separate_fusion, separate_classifier, shared_classifier };

std::string_view to_string(HierarchyStrategy s);
HierarchyStrategy parse_hierarchy_strategy(std::string_view s);

/// Which inputs the model consumes.
struct ModalitySet {
    bool rgb = true;
    bool flow = true;
    bool text = true;

    bool has_visual() const { return rgb || flow; }
    std::size_t visual_count() const { return static_cast<std::size_t>(rgb) + static_cast<std::size_t>(flow); }
    /// "rgb+flow+text", "rgb", "flow+text", ...
    std::string to_string() const;
    static ModalitySet parse(std::string_view s);
    friend bool operator==(const ModalitySet&, const ModalitySet&) = default;
};

struct ModelConfig {
    VideoConfig video;
    FusionConfig fusion;
    HierarchyStrategy strategy = HierarchyStrategy::contextual_data;
    ModalitySet modalities;
    bool joint_loss = true;
    std::size_t text_dim = 768;
    std::size_t n_fine = 51;
    std::size_t n_coarse = 7;
    std::size_t trunk_dim = 768; // shared_classifier only

    void validate() const;
};

/// Per-sample inputs; absent modalities stay undefined.
template <typename T>
struct ModelInputs {
    BasicTensor<T> rgb;  // n_blocks x raw_dim_rgb
    BasicTensor<T> flow; // n_blocks x raw_dim_flow
    BasicTensor<T> text; // text_dim
};

template <typename T>
struct Logits {
    BasicTensor<T> fine;
    BasicTensor<T> coarse; // undefined without the joint loss

    bool has_coarse() const { return coarse.defined(); }
};

template <typename T>
class Model {
public:
    Model(const ModelConfig& cfg, std::uint64_t seed);
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    /// Attention maps and normalized activations of every encoder are
    /// appended to `trace` when given.
    Logits<T> forward(const ModelInputs<T>& inputs, EncoderTrace<T>* trace = nullptr) const;

    const ModelConfig& config() const { return cfg_; }
    ParameterStore<T>& parameters() { return store_; }
    const ParameterStore<T>& parameters() const { return store_; }

    /// Names of parameters fed only by the visual streams.
    std::vector<std::string> visual_parameter_names() const;

private:
    std::vector<BasicTensor<T>> visual_vectors(const ModelInputs<T>& inputs, EncoderTrace<T>* trace) const;
    const BasicTensor<T>& checked_text(const ModelInputs<T>& inputs) const;

    ModelConfig cfg_;
    ParameterStore<T> store_;
    std::optional<VideoEncoder<T>> rgb_;
    std::optional<VideoEncoder<T>> flow_;
    std::optional<VideoEncoder<T>> early_;
    std::optional<FusionTransformer<T>> fusion_;
    std::optional<TwoStreamFusion<T>> two_stream_;
    std::optional<Linear<T>> bypass_;
    std::optional<Linear<T>> bypass_coarse_;
    std::optional<Linear<T>> trunk_;
    Linear<T> fine_head_;
    std::optional<Linear<T>> coarse_head_;
};

/// Mean-over-classes sigmoid BCE of one head. Targets must be 0 or 1.
template <typename T>
BasicTensor<T> head_loss(const BasicTensor<T>& logits, const BasicTensor<T>& targets);

/// Fine term plus, when the model has a coarse head, the coarse term.
/// Requires at least one positive fine target.
template <typename T>
BasicTensor<T> joint_loss(const Logits<T>& logits, const BasicTensor<T>& y_fine, const BasicTensor<T>& y_coarse);

/// Indices of the k largest values, ties broken by ascending index.
std::vector<std::size_t> predict_topk(std::span<const float> logits, std::size_t k);
std::vector<std::size_t> predict_topk(std::span<const double> logits, std::size_t k);

struct Ranking {
    std::vector<std::size_t> fine;
    std::vector<std::size_t> coarse; // empty without a coarse head
};

/// Ranks k entries of each head (k clamped to each head's class count).
template <typename T>
Ranking rank_logits(const Logits<T>& logits, std::size_t k);

} // namespace hieract
