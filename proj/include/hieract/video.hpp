#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "hieract/encoder.hpp"
#include "hieract/parameter.hpp"
#include "hieract/tensor.hpp"

namespace hieract {

enum class Modality { rgb, flow };
enum class VisualFusion { early, late };

std::string_view to_string(Modality m);
std::string_view to_string(VisualFusion f);
Modality parse_modality(std::string_view s);
VisualFusion parse_visual_fusion(std::string_view s);

/// Block-level features of one modality for one trimmed segment.
struct FeatureSequence {
    Modality modality = Modality::rgb;
    Tensor blocks;              // n_blocks x d_raw
    std::size_t block_size = 5; // frames per block
    double fps = 25.0;
    std::size_t padded_blocks = 0; // copies of the earliest block prepended

    std::size_t n_blocks() const { return blocks.shape()[0]; }
    std::size_t raw_dim() const { return blocks.shape()[1]; }
};

struct VideoConfig {
    std::size_t n_blocks = 32; // T + 1
    std::size_t block_size = 5;
    double fps = 25.0;
    std::size_t raw_dim_rgb = 1280;
    std::size_t raw_dim_flow = 2048;
    VisualFusion visual_fusion = VisualFusion::late;
    EncoderConfig encoder;

    double duration_seconds() const { return static_cast<double>(n_blocks * block_size) / fps; }
    std::size_t raw_dim(Modality m) const { return m == Modality::rgb ? raw_dim_rgb : raw_dim_flow; }
    void validate() const;
};

/// Fit a segment's features to exactly n_blocks blocks.
///
/// rgb: `features` holds one row per frame; each block takes the feature of
/// its central frame (offset block_size / 2). flow: `features` holds one
/// precomputed row per block_size-frame window. The trailing n_blocks
/// blocks are kept; when fewer are available the earliest block is
/// repeated at the front and the count is recorded in padded_blocks.
FeatureSequence chunk_blocks(Modality modality, const Tensor& features, std::size_t block_size, std::size_t n_blocks,
                             double fps = 25.0);

/// One modality's projection (d_raw -> D) followed by a transformer encoder.
template <typename T>
class VideoEncoder {
public:
    VideoEncoder() = default;
    VideoEncoder(const VideoConfig& cfg, std::size_t raw_dim, ParameterStore<T>& store, const std::string& prefix,
                 Rng& rng);

    /// blocks: n_blocks x raw_dim. Returns the pooled D-vector.
    BasicTensor<T> encode(const BasicTensor<T>& blocks, EncoderTrace<T>* trace = nullptr) const;

    std::size_t raw_dim() const { return projection_.in_features(); }
    const Encoder<T>& encoder() const { return encoder_; }

private:
    Linear<T> projection_;
    Encoder<T> encoder_;
    std::size_t n_blocks_ = 0;
};

/// Early visual fusion: per-block concatenation of rgb and flow features
/// through a single encoder whose raw width is d_rgb + d_flow.
template <typename T>
BasicTensor<T> early_fuse_encode(const VideoEncoder<T>& encoder, const BasicTensor<T>& rgb_blocks,
                                 const BasicTensor<T>& flow_blocks, EncoderTrace<T>* trace = nullptr);

} // namespace hieract
