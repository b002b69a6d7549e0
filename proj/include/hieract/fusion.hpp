#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hieract/encoder.hpp"
#include "hieract/parameter.hpp"

namespace hieract {

enum class FusionStrategy { separate_modalities, visual_concat, concat_all };

std::string_view to_string(FusionStrategy s);
FusionStrategy parse_fusion_strategy(std::string_view s);

struct FusionConfig {
    FusionStrategy strategy = FusionStrategy::visual_concat;
    std::size_t n_layers = 2;
    std::size_t n_heads = 2;
    std::size_t fuse_dim = 768;
    std::size_t ffn_hidden = 0; // 0 selects 4 * fuse_dim

    EncoderConfig encoder_config() const;
    void validate() const;
};

/// Mixes pooled visual vectors and the text embedding with an encoder stack
/// that has no CLS token and no positional encoding; the output tokens are
/// mean-pooled into m_Fus.
///
/// Token assembly by strategy:
///   visual_concat        concat(visual...) -> D_hat, text -> D_hat   (2 tokens)
///   separate_modalities  each visual -> D_hat, text -> D_hat         (n_visual + 1)
///   concat_all           concat(visual..., text) -> D_hat            (1 token)
template <typename T>
class FusionTransformer {
public:
    FusionTransformer() = default;
    /// visual_names labels each visual input (e.g. "rgb", "flow"); every
    /// visual input has width visual_dim.
    FusionTransformer(const FusionConfig& cfg, std::vector<std::string> visual_names, std::size_t visual_dim,
                      std::size_t text_dim, ParameterStore<T>& store, const std::string& prefix, Rng& rng);

    /// Project inputs into the token matrix (n_tokens x D_hat).
    BasicTensor<T> assemble(const std::vector<BasicTensor<T>>& visual, const BasicTensor<T>& text) const;
    /// Run the encoder stack on assembled tokens and mean-pool.
    BasicTensor<T> mix(const BasicTensor<T>& tokens, EncoderTrace<T>* trace = nullptr) const;
    /// assemble + mix.
    BasicTensor<T> fuse(const std::vector<BasicTensor<T>>& visual, const BasicTensor<T>& text,
                        EncoderTrace<T>* trace = nullptr) const;

    std::size_t token_count() const { return token_count_; }
    const FusionConfig& config() const { return cfg_; }

private:
    FusionConfig cfg_;
    std::size_t visual_dim_ = 0;
    std::size_t text_dim_ = 0;
    std::size_t n_visual_ = 0;
    std::size_t token_count_ = 0;
    std::vector<Linear<T>> projections_;
    Encoder<T> encoder_;
};

/// Two independent visual_concat fusion transformers: one feeds the fine
/// head, the other the coarse head.
template <typename T>
class TwoStreamFusion {
public:
    TwoStreamFusion() = default;
    TwoStreamFusion(const FusionConfig& cfg, std::vector<std::string> visual_names, std::size_t visual_dim,
                    std::size_t text_dim, ParameterStore<T>& store, const std::string& prefix, std::uint64_t fine_seed,
                    std::uint64_t coarse_seed);

    std::pair<BasicTensor<T>, BasicTensor<T>> fuse(const std::vector<BasicTensor<T>>& visual,
                                                   const BasicTensor<T>& text, EncoderTrace<T>* trace = nullptr) const;

    const FusionTransformer<T>& fine() const { return fine_; }
    const FusionTransformer<T>& coarse() const { return coarse_; }

private:
    FusionTransformer<T> fine_;
    FusionTransformer<T> coarse_;
};

} // namespace hieract
