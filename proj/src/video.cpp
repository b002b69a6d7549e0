#include "hieract/video.hpp"

#include <algorithm>

#include "hieract/errors.hpp"

namespace hieract {

std::string_view to_string(Modality m) { return m == Modality::rgb ? "rgb" : "flow"; }
std::string_view to_string(VisualFusion f) { return f == VisualFusion::early ? "early" : "late"; }

Modality parse_modality(std::string_view s) {
    if (s == "rgb") return Modality::rgb;
    if (s == "flow") return Modality::flow;
    throw ConfigError("modality must be rgb|flow, got '" + std::string(s) + "'");
}

VisualFusion parse_visual_fusion(std::string_view s) {
    if (s == "early") return VisualFusion::early;
    if (s == "late") return VisualFusion::late;
    throw ConfigError("visual_fusion must be early|late, got '" + std::string(s) + "'");
}

void VideoConfig::validate() const {
    if (n_blocks == 0 || block_size == 0) {
        throw ConfigError("video n_blocks and block_size must be positive");
    }
    if (!(fps > 0.0)) {
        throw ConfigError("video fps must be positive");
    }
    if (raw_dim_rgb == 0 || raw_dim_flow == 0) {
        throw ConfigError("video raw dims must be positive");
    }
    encoder.validate();
}

FeatureSequence chunk_blocks(Modality modality, const Tensor& features, std::size_t block_size, std::size_t n_blocks,
                             double fps) {
    if (block_size == 0 || n_blocks == 0) {
        throw ContractError("chunk_blocks: block_size and n_blocks must be positive");
    }
    if (!features.defined() || features.rank() != 2) {
        throw DimensionError("chunk_blocks: features must be rows x dim");
    }
    const std::size_t rows = features.shape()[0];
    const std::size_t dim = features.shape()[1];

    // Row index of every available block, oldest first.
    std::vector<std::size_t> picks;
    if (modality == Modality::rgb) {
        std::size_t complete = rows / block_size;
        if (complete == 0) {
            picks.push_back(rows / 2); // a single partial block
        } else {
            std::size_t used = std::min(complete, n_blocks);
            std::size_t start = rows - used * block_size;
            for (std::size_t b = 0; b < used; ++b) {
                picks.push_back(start + b * block_size + block_size / 2);
            }
        }
    } else {
        std::size_t used = std::min(rows, n_blocks);
        for (std::size_t b = rows - used; b < rows; ++b) {
            picks.push_back(b);
        }
    }

    FeatureSequence seq;
    seq.modality = modality;
    seq.block_size = block_size;
    seq.fps = fps;
    seq.padded_blocks = n_blocks - picks.size();
    std::vector<std::size_t> order(seq.padded_blocks, picks.front());
    order.insert(order.end(), picks.begin(), picks.end());

    std::vector<float> values;
    values.reserve(n_blocks * dim);
    auto src = features.data();
    for (auto r : order) {
        values.insert(values.end(), src.begin() + static_cast<std::ptrdiff_t>(r * dim),
                      src.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
    }
    seq.blocks = Tensor::from_vector(std::move(values), {n_blocks, dim});
    return seq;
}

template <typename T>
VideoEncoder<T>::VideoEncoder(const VideoConfig& cfg, std::size_t raw_dim, ParameterStore<T>& store,
                              const std::string& prefix, Rng& rng)
    : n_blocks_(cfg.n_blocks) {
    projection_ = Linear<T>(store, prefix + ".proj", raw_dim, cfg.encoder.embed_dim, rng);
    encoder_ = Encoder<T>(cfg.encoder, cfg.n_blocks, store, prefix + ".encoder", rng);
}

template <typename T>
BasicTensor<T> VideoEncoder<T>::encode(const BasicTensor<T>& blocks, EncoderTrace<T>* trace) const {
    if (blocks.rank() != 2 || blocks.shape()[1] != raw_dim()) {
        throw DimensionError("video_encode: blocks " + shape_str(blocks.shape()) + " do not match raw dim " +
                             std::to_string(raw_dim()));
    }
    if (blocks.shape()[0] != n_blocks_) {
        throw DimensionError("video_encode: expected " + std::to_string(n_blocks_) + " blocks, got " +
                             std::to_string(blocks.shape()[0]));
    }
    return encoder_.encode(projection_(blocks), trace).pooled;
}

template <typename T>
BasicTensor<T> early_fuse_encode(const VideoEncoder<T>& encoder, const BasicTensor<T>& rgb_blocks,
                                 const BasicTensor<T>& flow_blocks, EncoderTrace<T>* trace) {
    if (rgb_blocks.rank() != 2 || flow_blocks.rank() != 2 || rgb_blocks.shape()[0] != flow_blocks.shape()[0]) {
        throw DimensionError("early_fuse_encode: block counts differ, rgb " + shape_str(rgb_blocks.shape()) +
                             " vs flow " + shape_str(flow_blocks.shape()));
    }
    return encoder.encode(concat_lastdim<T>({rgb_blocks, flow_blocks}), trace);
}

template class VideoEncoder<float>;
template class VideoEncoder<double>;
template BasicTensor<float> early_fuse_encode(const VideoEncoder<float>&, const BasicTensor<float>&,
                                              const BasicTensor<float>&, EncoderTrace<float>*);
template BasicTensor<double> early_fuse_encode(const VideoEncoder<double>&, const BasicTensor<double>&,
                                               const BasicTensor<double>&, EncoderTrace<double>*);

} // namespace hieract
