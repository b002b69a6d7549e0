#include "hieract/fusion.hpp"

#include "hieract/errors.hpp"

namespace hieract {

std::string_view to_string(FusionStrategy s) {
    switch (s) {
    case FusionStrategy::separate_modalities:
        return "separate_modalities";
    case FusionStrategy::visual_concat:
        return "visual_concat";
    case FusionStrategy::concat_all:
        return "concat_all";
    }
    return "?";
}

FusionStrategy parse_fusion_strategy(std::string_view s) {
    if (s == "separate_modalities") return FusionStrategy::separate_modalities;
    if (s == "visual_concat") return FusionStrategy::visual_concat;
    if (s == "concat_all") return FusionStrategy::concat_all;
    throw ConfigError("fusion strategy must be separate_modalities|visual_concat|concat_all, got '" + std::string(s) +
                      "'");
}

EncoderConfig FusionConfig::encoder_config() const {
    EncoderConfig e;
    e.n_layers = n_layers;
    e.n_heads = n_heads;
    e.embed_dim = fuse_dim;
    e.pos_encoding = PosEncoding::none;
    e.pooling = Pooling::mean;
    e.ffn_hidden = ffn_hidden;
    return e;
}

void FusionConfig::validate() const {
    if (fuse_dim == 0 || n_heads == 0) {
        throw ConfigError("fusion fuse_dim and n_heads must be positive");
    }
    if (fuse_dim % n_heads != 0) {
        throw ConfigError("fusion fuse_dim " + std::to_string(fuse_dim) + " is not divisible by n_heads " +
                          std::to_string(n_heads));
    }
}

template <typename T>
FusionTransformer<T>::FusionTransformer(const FusionConfig& cfg, std::vector<std::string> visual_names,
                                        std::size_t visual_dim, std::size_t text_dim, ParameterStore<T>& store,
                                        const std::string& prefix, Rng& rng)
    : cfg_(cfg), visual_dim_(visual_dim), text_dim_(text_dim), n_visual_(visual_names.size()) {
    cfg_.validate();
    if (n_visual_ == 0) {
        throw ConfigError("fusion transformer needs at least one visual input");
    }
    const std::size_t d = cfg_.fuse_dim;
    switch (cfg_.strategy) {
    case FusionStrategy::visual_concat:
        projections_.emplace_back(store, prefix + ".proj.visual", n_visual_ * visual_dim, d, rng);
        projections_.emplace_back(store, prefix + ".proj.text", text_dim, d, rng);
        token_count_ = 2;
        break;
    case FusionStrategy::separate_modalities:
        for (const auto& name : visual_names) {
            projections_.emplace_back(store, prefix + ".proj." + name, visual_dim, d, rng);
        }
        projections_.emplace_back(store, prefix + ".proj.text", text_dim, d, rng);
        token_count_ = n_visual_ + 1;
        break;
    case FusionStrategy::concat_all:
        projections_.emplace_back(store, prefix + ".proj.all", n_visual_ * visual_dim + text_dim, d, rng);
        token_count_ = 1;
        break;
    }
    encoder_ = Encoder<T>(cfg_.encoder_config(), token_count_, store, prefix + ".encoder", rng);
}

template <typename T>
BasicTensor<T> FusionTransformer<T>::assemble(const std::vector<BasicTensor<T>>& visual,
                                              const BasicTensor<T>& text) const {
    if (visual.size() != n_visual_) {
        throw DimensionError("fuse: expected " + std::to_string(n_visual_) + " visual inputs, got " +
                             std::to_string(visual.size()));
    }
    for (const auto& v : visual) {
        if (v.shape() != Shape{visual_dim_}) {
            throw DimensionError("fuse: visual input " + shape_str(v.shape()) + " does not match width " +
                                 std::to_string(visual_dim_));
        }
    }
    if (!text.defined() || text.shape() != Shape{text_dim_}) {
        throw DimensionError("fuse: text input must have width " + std::to_string(text_dim_));
    }
    std::vector<BasicTensor<T>> tokens;
    switch (cfg_.strategy) {
    case FusionStrategy::visual_concat: {
        auto vis = visual.size() == 1 ? visual.front() : concat_lastdim(visual);
        tokens.push_back(projections_[0](vis));
        tokens.push_back(projections_[1](text));
        break;
    }
    case FusionStrategy::separate_modalities:
        for (std::size_t i = 0; i < visual.size(); ++i) {
            tokens.push_back(projections_[i](visual[i]));
        }
        tokens.push_back(projections_.back()(text));
        break;
    case FusionStrategy::concat_all: {
        auto all = visual;
        all.push_back(text);
        tokens.push_back(projections_[0](concat_lastdim(all)));
        break;
    }
    }
    return stack(tokens);
}

template <typename T>
BasicTensor<T> FusionTransformer<T>::mix(const BasicTensor<T>& tokens, EncoderTrace<T>* trace) const {
    return encoder_.encode(tokens, trace).pooled;
}

template <typename T>
BasicTensor<T> FusionTransformer<T>::fuse(const std::vector<BasicTensor<T>>& visual, const BasicTensor<T>& text,
                                          EncoderTrace<T>* trace) const {
    return mix(assemble(visual, text), trace);
}

template <typename T>
TwoStreamFusion<T>::TwoStreamFusion(const FusionConfig& cfg, std::vector<std::string> visual_names,
                                    std::size_t visual_dim, std::size_t text_dim, ParameterStore<T>& store,
                                    const std::string& prefix, std::uint64_t fine_seed, std::uint64_t coarse_seed) {
    FusionConfig stream_cfg = cfg;
    stream_cfg.strategy = FusionStrategy::visual_concat;
    Rng fine_rng(fine_seed);
    Rng coarse_rng(coarse_seed);
    fine_ = FusionTransformer<T>(stream_cfg, visual_names, visual_dim, text_dim, store, prefix + ".fine", fine_rng);
    coarse_ = FusionTransformer<T>(stream_cfg, visual_names, visual_dim, text_dim, store, prefix + ".coarse",
                                   coarse_rng);
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> TwoStreamFusion<T>::fuse(const std::vector<BasicTensor<T>>& visual,
                                                                   const BasicTensor<T>& text,
                                                                   EncoderTrace<T>* trace) const {
    return {fine_.fuse(visual, text, trace), coarse_.fuse(visual, text, trace)};
}

template class FusionTransformer<float>;
template class FusionTransformer<double>;
template class TwoStreamFusion<float>;
template class TwoStreamFusion<double>;

} // namespace hieract
