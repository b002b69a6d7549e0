#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "hieract/parameter.hpp"
#include "hieract/tensor.hpp"

namespace hieract {

enum class PosEncoding { none, fixed, learnable };
enum class Pooling { cls, mean };

std::string_view to_string(PosEncoding p);
std::string_view to_string(Pooling p);
PosEncoding parse_pos_encoding(std::string_view s);
Pooling parse_pooling(std::string_view s);

struct EncoderConfig {
    std::size_t n_layers = 4;
    std::size_t n_heads = 1;
    std::size_t embed_dim = 2048;
    PosEncoding pos_encoding = PosEncoding::learnable;
    Pooling pooling = Pooling::cls;
    std::size_t ffn_hidden = 0; // 0 selects 4 * embed_dim

    std::size_t ffn_width() const { return ffn_hidden ? ffn_hidden : 4 * embed_dim; }
    void validate() const;
};

template <typename T>
struct EncoderOutput {
    BasicTensor<T> tokens; // (L+1) x D with CLS, L x D without
    BasicTensor<T> pooled; // D
};

/// Optional capture of intermediate values for invariant checks.
template <typename T>
struct EncoderTrace {
    std::vector<BasicTensor<T>> attention;  // one L x L matrix per head per layer
    std::vector<BasicTensor<T>> normalized; // pre-affine layer-norm outputs
};

/// Row p, column 2i = sin(p / 10000^(2i/dim)); column 2i+1 = cos of the same.
template <typename T>
BasicTensor<T> sinusoidal_encoding(std::size_t length, std::size_t dim);

/// X_0 = F_hat + E_pos. Shapes must match exactly.
template <typename T>
BasicTensor<T> add_positional(const BasicTensor<T>& tokens, const BasicTensor<T>& encoding);

template <typename T>
struct AttentionHead {
    Linear<T> query;
    Linear<T> key;
    Linear<T> value;
};

/// Multi-head self-attention with per-head D -> D/h projections and an
/// output projection over the concatenated heads.
template <typename T>
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParameterStore<T>& store, const std::string& prefix, std::size_t embed_dim,
                       std::size_t n_heads, Rng& rng);

    BasicTensor<T> operator()(const BasicTensor<T>& x, EncoderTrace<T>* trace = nullptr) const;

    std::size_t n_heads() const { return heads_.size(); }
    const std::vector<AttentionHead<T>>& heads() const { return heads_; }
    const Linear<T>& output() const { return output_; }

private:
    std::vector<AttentionHead<T>> heads_;
    Linear<T> output_;
    std::size_t embed_dim_ = 0;
};

/// Pre-norm transformer encoder with optional CLS token and positional
/// encoding. The CLS row is appended after the input tokens.
template <typename T>
class Encoder {
public:
    Encoder() = default;
    /// seq_len is the number of input rows (without CLS).
    Encoder(const EncoderConfig& cfg, std::size_t seq_len, ParameterStore<T>& store, const std::string& prefix,
            Rng& rng);

    EncoderOutput<T> encode(const BasicTensor<T>& features, EncoderTrace<T>* trace = nullptr) const;

    const EncoderConfig& config() const { return cfg_; }
    std::size_t seq_len() const { return seq_len_; }
    std::size_t token_count() const { return seq_len_ + (cfg_.pooling == Pooling::cls ? 1 : 0); }

private:
    struct Block {
        LayerNorm<T> attn_norm;
        MultiHeadAttention<T> attention;
        LayerNorm<T> ffn_norm;
        Linear<T> ffn_in;
        Linear<T> ffn_out;
    };

    EncoderConfig cfg_;
    std::size_t seq_len_ = 0;
    BasicTensor<T> cls_;
    BasicTensor<T> learned_pos_;
    BasicTensor<T> fixed_pos_;
    std::vector<Block> blocks_;
};

} // namespace hieract
