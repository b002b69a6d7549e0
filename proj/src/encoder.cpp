#include "hieract/encoder.hpp"

#include <cmath>

#include "hieract/errors.hpp"

namespace hieract {

std::string_view to_string(PosEncoding p) {
    switch (p) {
    case PosEncoding::none:
        return "none";
    case PosEncoding::fixed:
        return "fixed";
    case PosEncoding::learnable:
        return "learnable";
    }
    return "?";
}

std::string_view to_string(Pooling p) { return p == Pooling::cls ? "cls" : "mean"; }

PosEncoding parse_pos_encoding(std::string_view s) {
    if (s == "none") return PosEncoding::none;
    if (s == "fixed") return PosEncoding::fixed;
    if (s == "learnable") return PosEncoding::learnable;
    throw ConfigError("pos_encoding must be one of none|fixed|learnable, got '" + std::string(s) + "'");
}

Pooling parse_pooling(std::string_view s) {
    if (s == "cls") return Pooling::cls;
    if (s == "mean") return Pooling::mean;
    throw ConfigError("pooling must be one of cls|mean, got '" + std::string(s) + "'");
}

void EncoderConfig::validate() const {
    if (n_heads == 0 || embed_dim == 0) {
        throw ConfigError("encoder n_heads and embed_dim must be positive");
    }
    if (embed_dim % n_heads != 0) {
        throw ConfigError("encoder embed_dim " + std::to_string(embed_dim) + " is not divisible by n_heads " +
                          std::to_string(n_heads));
    }
    if (pos_encoding == PosEncoding::fixed && embed_dim % 2 != 0) {
        throw ConfigError("fixed positional encoding needs an even embed_dim, got " + std::to_string(embed_dim));
    }
}

template <typename T>
BasicTensor<T> sinusoidal_encoding(std::size_t length, std::size_t dim) {
    if (dim % 2 != 0) {
        throw ContractError("sinusoidal_encoding: dim must be even, got " + std::to_string(dim));
    }
    std::vector<T> values(length * dim);
    for (std::size_t p = 0; p < length; ++p) {
        for (std::size_t i = 0; i < dim / 2; ++i) {
            double angle = static_cast<double>(p) / std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(dim));
            values[p * dim + 2 * i] = static_cast<T>(std::sin(angle));
            values[p * dim + 2 * i + 1] = static_cast<T>(std::cos(angle));
        }
    }
    return BasicTensor<T>::from_vector(std::move(values), {length, dim});
}

template <typename T>
BasicTensor<T> add_positional(const BasicTensor<T>& tokens, const BasicTensor<T>& encoding) {
    if (tokens.shape() != encoding.shape()) {
        throw DimensionError("add_positional: tokens " + shape_str(tokens.shape()) + " vs encoding " +
                             shape_str(encoding.shape()));
    }
    return add(tokens, encoding);
}

// ---- attention -----------------------------------------------------------

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(ParameterStore<T>& store, const std::string& prefix, std::size_t embed_dim,
                                          std::size_t n_heads, Rng& rng)
    : embed_dim_(embed_dim) {
    if (n_heads == 0 || embed_dim % n_heads != 0) {
        throw ConfigError("attention: embed_dim " + std::to_string(embed_dim) + " not divisible by n_heads " +
                          std::to_string(n_heads));
    }
    std::size_t head_dim = embed_dim / n_heads;
    for (std::size_t h = 0; h < n_heads; ++h) {
        std::string hp = prefix + ".head" + std::to_string(h);
        AttentionHead<T> head;
        head.query = Linear<T>(store, hp + ".query", embed_dim, head_dim, rng);
        head.key = Linear<T>(store, hp + ".key", embed_dim, head_dim, rng);
        head.value = Linear<T>(store, hp + ".value", embed_dim, head_dim, rng);
        heads_.push_back(std::move(head));
    }
    output_ = Linear<T>(store, prefix + ".out", embed_dim, embed_dim, rng);
}

template <typename T>
BasicTensor<T> MultiHeadAttention<T>::operator()(const BasicTensor<T>& x, EncoderTrace<T>* trace) const {
    if (x.rank() != 2 || x.shape()[1] != embed_dim_) {
        throw DimensionError("attention: expected L x " + std::to_string(embed_dim_) + " input, got " +
                             shape_str(x.shape()));
    }
    const std::size_t head_dim = embed_dim_ / heads_.size();
    const T inv_scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(head_dim)));
    std::vector<BasicTensor<T>> outputs;
    outputs.reserve(heads_.size());
    for (const auto& head : heads_) {
        auto q = head.query(x);
        auto k = head.key(x);
        auto v = head.value(x);
        auto weights = softmax_lastdim(scale(matmul(q, transpose(k)), inv_scale));
        if (trace) {
            trace->attention.push_back(weights);
        }
        outputs.push_back(matmul(weights, v));
    }
    auto merged = outputs.size() == 1 ? outputs.front() : concat_lastdim(outputs);
    return output_(merged);
}

// ---- encoder -------------------------------------------------------------

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& cfg, std::size_t seq_len, ParameterStore<T>& store,
                    const std::string& prefix, Rng& rng)
    : cfg_(cfg), seq_len_(seq_len) {
    cfg_.validate();
    if (seq_len == 0) {
        throw ConfigError("encoder sequence length must be positive");
    }
    const std::size_t d = cfg_.embed_dim;
    if (cfg_.pooling == Pooling::cls) {
        cls_ = store.add(prefix + ".cls", {d}, init_normal<T>(rng, d, 0.02), false);
    }
    const std::size_t tokens = token_count();
    if (cfg_.pos_encoding == PosEncoding::learnable) {
        learned_pos_ = store.add(prefix + ".pos", {tokens, d}, init_normal<T>(rng, tokens * d, 0.02), false);
    } else if (cfg_.pos_encoding == PosEncoding::fixed) {
        fixed_pos_ = sinusoidal_encoding<T>(tokens, d);
    }
    for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
        std::string lp = prefix + ".layer" + std::to_string(i);
        Block block;
        block.attn_norm = LayerNorm<T>(store, lp + ".attn_norm", d);
        block.attention = MultiHeadAttention<T>(store, lp + ".attn", d, cfg_.n_heads, rng);
        block.ffn_norm = LayerNorm<T>(store, lp + ".ffn_norm", d);
        block.ffn_in = Linear<T>(store, lp + ".ffn_in", d, cfg_.ffn_width(), rng);
        block.ffn_out = Linear<T>(store, lp + ".ffn_out", cfg_.ffn_width(), d, rng);
        blocks_.push_back(std::move(block));
    }
}

template <typename T>
EncoderOutput<T> Encoder<T>::encode(const BasicTensor<T>& features, EncoderTrace<T>* trace) const {
    if (features.rank() != 2 || features.shape()[1] != cfg_.embed_dim) {
        throw DimensionError("encode: features " + shape_str(features.shape()) + " do not have width D=" +
                             std::to_string(cfg_.embed_dim));
    }
    if (cfg_.pos_encoding != PosEncoding::none && features.shape()[0] != seq_len_) {
        throw DimensionError("encode: expected " + std::to_string(seq_len_) + " input rows, got " +
                             std::to_string(features.shape()[0]));
    }
    BasicTensor<T> x = features;
    if (cfg_.pooling == Pooling::cls) {
        x = concat_rows<T>({features, reshape(cls_, {1, cfg_.embed_dim})});
    }
    if (cfg_.pos_encoding == PosEncoding::learnable) {
        x = add_positional(x, learned_pos_);
    } else if (cfg_.pos_encoding == PosEncoding::fixed) {
        x = add_positional(x, fixed_pos_);
    }

    auto norm = [trace](const LayerNorm<T>& ln, const BasicTensor<T>& v) {
        auto standardized = standardize_lastdim(v, ln.eps);
        if (trace) {
            trace->normalized.push_back(standardized);
        }
        return add(mul(standardized, ln.gain), ln.bias);
    };

    for (const auto& block : blocks_) {
        x = add(x, block.attention(norm(block.attn_norm, x), trace));
        x = add(x, block.ffn_out(gelu(block.ffn_in(norm(block.ffn_norm, x)))));
    }

    EncoderOutput<T> out;
    out.tokens = x;
    out.pooled = cfg_.pooling == Pooling::cls ? row(x, x.shape()[0] - 1) : mean_over_axis(x, 0);
    return out;
}

template BasicTensor<float> sinusoidal_encoding<float>(std::size_t, std::size_t);
template BasicTensor<double> sinusoidal_encoding<double>(std::size_t, std::size_t);
template BasicTensor<float> add_positional(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> add_positional(const BasicTensor<double>&, const BasicTensor<double>&);
template class MultiHeadAttention<float>;
template class MultiHeadAttention<double>;
template class Encoder<float>;
template class Encoder<double>;

} // namespace hieract
