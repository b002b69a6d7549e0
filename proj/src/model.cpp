#include "hieract/model.hpp"

#include <algorithm>
#include <numeric>

#include "hieract/errors.hpp"
#include "hieract/random.hpp"

namespace hieract {

std::string_view to_string(HierarchyStrategy s) {
    switch (s) {
    case HierarchyStrategy::contextual_data:
        return "contextual_data";
    case HierarchyStrategy::separate_fusion:
        return "separate_fusion";
    case HierarchyStrategy::separate_classifier:
        return "separate_classifier";
    case HierarchyStrategy::shared_classifier:
        return "shared_classifier";
    }
    return "?";
}

HierarchyStrategy parse_hierarchy_strategy(std::string_view s) {
    if (s == "contextual_data") return HierarchyStrategy::contextual_data;
    if (s == "separate_fusion") return HierarchyStrategy::separate_fusion;
    if (s == "separate_classifier") return HierarchyStrategy::separate_classifier;
    if (s == "shared_classifier") return HierarchyStrategy::shared_classifier;
    throw ConfigError("hierarchy strategy must be contextual_data|separate_fusion|separate_classifier|"
                      "shared_classifier, got '" +
                      std::string(s) + "'");
}

std::string ModalitySet::to_string() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (on) {
            out += (out.empty() ? "" : "+");
            out += name;
        }
    };
    add(rgb, "rgb");
    add(flow, "flow");
    add(text, "text");
    return out;
}

ModalitySet ModalitySet::parse(std::string_view s) {
    ModalitySet m{false, false, false};
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto end = s.find('+', pos);
        if (end == std::string_view::npos) {
            end = s.size();
        }
        auto part = s.substr(pos, end - pos);
        bool* slot = part == "rgb" ? &m.rgb : part == "flow" ? &m.flow : part == "text" ? &m.text : nullptr;
        if (slot == nullptr) {
            throw ConfigError("modality set '" + std::string(s) + "': unknown modality '" + std::string(part) +
                              "' (use rgb, flow, text joined by '+')");
        }
        if (*slot) {
            throw ConfigError("modality set '" + std::string(s) + "' lists '" + std::string(part) + "' twice");
        }
        *slot = true;
        pos = end + 1;
    }
    return m;
}

void ModelConfig::validate() const {
    video.validate();
    fusion.validate();
    if (!modalities.has_visual()) {
        throw ConfigError("modalities '" + modalities.to_string() + "' need at least one of rgb, flow");
    }
    if (strategy == HierarchyStrategy::contextual_data && !modalities.text) {
        throw ConfigError("hierarchy strategy contextual_data reads the coarse class from text; add 'text' to "
                          "modalities or pick another strategy");
    }
    if (video.visual_fusion == VisualFusion::early && !(modalities.rgb && modalities.flow)) {
        throw ConfigError("early visual fusion needs both rgb and flow modalities");
    }
    if (n_fine == 0 || n_coarse == 0) {
        throw ConfigError("class counts must be positive");
    }
    if (modalities.text && text_dim == 0) {
        throw ConfigError("text_dim must be positive");
    }
    if (strategy == HierarchyStrategy::shared_classifier && trunk_dim == 0) {
        throw ConfigError("trunk_dim must be positive");
    }
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    auto rng_for = [seed](std::string_view part) { return Rng(derive_seed(seed, part)); };
    const std::size_t d = cfg_.video.encoder.embed_dim;
    const std::size_t d_hat = cfg_.fusion.fuse_dim;

    std::vector<std::string> visual_names;
    if (cfg_.video.visual_fusion == VisualFusion::early) {
        auto rng = rng_for("video.early");
        early_.emplace(cfg_.video, cfg_.video.raw_dim_rgb + cfg_.video.raw_dim_flow, store_, "video.early", rng);
        visual_names.push_back("visual");
    } else {
        if (cfg_.modalities.rgb) {
            auto rng = rng_for("video.rgb");
            rgb_.emplace(cfg_.video, cfg_.video.raw_dim_rgb, store_, "video.rgb", rng);
            visual_names.push_back("rgb");
        }
        if (cfg_.modalities.flow) {
            auto rng = rng_for("video.flow");
            flow_.emplace(cfg_.video, cfg_.video.raw_dim_flow, store_, "video.flow", rng);
            visual_names.push_back("flow");
        }
    }

    const bool coarse = cfg_.joint_loss;
    const bool two_stream = cfg_.strategy == HierarchyStrategy::separate_fusion;
    if (cfg_.modalities.text) {
        if (two_stream) {
            two_stream_.emplace(cfg_.fusion, visual_names, d, cfg_.text_dim, store_, "fusion",
                                derive_seed(seed, "fusion.fine"), derive_seed(seed, "fusion.coarse"));
        } else {
            auto rng = rng_for("fusion");
            fusion_.emplace(cfg_.fusion, visual_names, d, cfg_.text_dim, store_, "fusion", rng);
        }
    } else {
        auto rng = rng_for("bypass");
        bypass_.emplace(store_, "bypass", visual_names.size() * d, d_hat, rng);
        if (two_stream && coarse) {
            auto rng_c = rng_for("bypass.coarse");
            bypass_coarse_.emplace(store_, "bypass.coarse", visual_names.size() * d, d_hat, rng_c);
        }
    }

    auto rng = rng_for("head");
    std::size_t head_in = d_hat;
    if (cfg_.strategy == HierarchyStrategy::shared_classifier) {
        trunk_.emplace(store_, "head.trunk", d_hat, cfg_.trunk_dim, rng);
        head_in = cfg_.trunk_dim;
    }
    fine_head_ = Linear<T>(store_, "head.fine", head_in, cfg_.n_fine, rng);
    if (coarse) {
        std::size_t coarse_in = cfg_.strategy == HierarchyStrategy::contextual_data ? cfg_.text_dim : head_in;
        coarse_head_.emplace(store_, "head.coarse", coarse_in, cfg_.n_coarse, rng);
    }
}

template <typename T>
std::vector<BasicTensor<T>> Model<T>::visual_vectors(const ModelInputs<T>& in, EncoderTrace<T>* trace) const {
    auto require = [](const BasicTensor<T>& t, const char* name) {
        if (!t.defined()) {
            throw DimensionError(std::string("model input '") + name + "' is required by the configured modalities");
        }
    };
    std::vector<BasicTensor<T>> out;
    if (early_) {
        require(in.rgb, "rgb");
        require(in.flow, "flow");
        out.push_back(early_fuse_encode(*early_, in.rgb, in.flow, trace));
        return out;
    }
    if (rgb_) {
        require(in.rgb, "rgb");
        out.push_back(rgb_->encode(in.rgb, trace));
    }
    if (flow_) {
        require(in.flow, "flow");
        out.push_back(flow_->encode(in.flow, trace));
    }
    return out;
}

template <typename T>
const BasicTensor<T>& Model<T>::checked_text(const ModelInputs<T>& in) const {
    if (!in.text.defined()) {
        throw DimensionError("model input 'text' is required by the configured modalities");
    }
    return in.text;
}

template <typename T>
Logits<T> Model<T>::forward(const ModelInputs<T>& inputs, EncoderTrace<T>* trace) const {
    auto visual = visual_vectors(inputs, trace);
    BasicTensor<T> fine_in;
    BasicTensor<T> coarse_in;
    if (cfg_.modalities.text) {
        const auto& text = checked_text(inputs);
        if (two_stream_) {
            auto [f, c] = two_stream_->fuse(visual, text, trace);
            fine_in = f;
            coarse_in = c;
        } else {
            fine_in = fusion_->fuse(visual, text, trace);
            coarse_in = cfg_.strategy == HierarchyStrategy::contextual_data ? text : fine_in;
        }
    } else {
        auto vis = visual.size() == 1 ? visual.front() : concat_lastdim(visual);
        fine_in = (*bypass_)(vis);
        coarse_in = bypass_coarse_ ? (*bypass_coarse_)(vis) : fine_in;
    }
    if (trunk_) {
        fine_in = gelu((*trunk_)(fine_in));
        coarse_in = fine_in;
    }
    Logits<T> out;
    out.fine = fine_head_(fine_in);
    if (coarse_head_) {
        out.coarse = (*coarse_head_)(coarse_in);
    }
    return out;
}

template <typename T>
std::vector<std::string> Model<T>::visual_parameter_names() const {
    std::vector<std::string> names;
    for (const auto& p : store_.items()) {
        if (p.name.rfind("video.", 0) == 0) {
            names.push_back(p.name);
        }
    }
    return names;
}

template <typename T>
BasicTensor<T> head_loss(const BasicTensor<T>& logits, const BasicTensor<T>& targets) {
    for (T y : targets.data()) {
        if (y != T(0) && y != T(1)) {
            throw ContractError("BCE targets must be 0 or 1, got " + std::to_string(static_cast<double>(y)));
        }
    }
    return bce_with_logits(logits, targets);
}

template <typename T>
BasicTensor<T> joint_loss(const Logits<T>& logits, const BasicTensor<T>& y_fine, const BasicTensor<T>& y_coarse) {
    auto yf = y_fine.data();
    if (std::none_of(yf.begin(), yf.end(), [](T v) { return v == T(1); })) {
        throw ContractError("joint_loss: a sample needs at least one positive fine target");
    }
    auto loss = head_loss(logits.fine, y_fine);
    if (logits.has_coarse()) {
        if (!y_coarse.defined()) {
            throw ContractError("joint_loss: coarse logits present but no coarse targets given");
        }
        loss = add(loss, head_loss(logits.coarse, y_coarse));
    }
    return loss;
}

namespace {

template <typename V>
std::vector<std::size_t> topk_impl(std::span<const V> logits, std::size_t k) {
    if (k == 0 || k > logits.size()) {
        throw ContractError("predict_topk: k=" + std::to_string(k) + " outside [1, " + std::to_string(logits.size()) +
                            "]");
    }
    std::vector<std::size_t> idx(logits.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
    idx.resize(k);
    return idx;
}

} // namespace

std::vector<std::size_t> predict_topk(std::span<const float> logits, std::size_t k) { return topk_impl(logits, k); }
std::vector<std::size_t> predict_topk(std::span<const double> logits, std::size_t k) { return topk_impl(logits, k); }

template <typename T>
Ranking rank_logits(const Logits<T>& logits, std::size_t k) {
    Ranking r;
    auto fine = logits.fine.data();
    r.fine = predict_topk(fine, std::min(k, fine.size()));
    if (logits.has_coarse()) {
        auto coarse = logits.coarse.data();
        r.coarse = predict_topk(coarse, std::min(k, coarse.size()));
    }
    return r;
}

#define HIERACT_INSTANTIATE_MODEL(T)                                                                                   \
    template class Model<T>;                                                                                           \
    template BasicTensor<T> head_loss(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
    template BasicTensor<T> joint_loss(const Logits<T>&, const BasicTensor<T>&, const BasicTensor<T>&);               \
    template Ranking rank_logits(const Logits<T>&, std::size_t);

HIERACT_INSTANTIATE_MODEL(float)
HIERACT_INSTANTIATE_MODEL(double)

} // namespace hieract
