#include "hieract/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hieract/encoder.hpp"
#include "hieract/errors.hpp"
#include "hieract/fusion.hpp"
#include "hieract/random.hpp"

namespace hieract {

namespace {

Tensor64 random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) {
        x = rng.normal() * scale;
    }
    return Tensor64::from_vector(std::move(v), std::move(shape));
}

Tensor64 weighted_sum(const Tensor64& y, const Tensor64& weights) { return sum(mul(y, weights)); }

} // namespace

double relative_error(double analytic, double numeric, double floor) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradcheckRow check_function(const std::string& name, const GradFn& f, std::vector<Tensor64> inputs,
                            const GradcheckOptions& options) {
    GradcheckRow row{name, 0, 0, 0.0, options.tolerance};
    Rng rng(derive_seed(options.seed, "gradcheck.weights:" + name));
    for (auto& x : inputs) {
        x = x.detach(true);
    }
    auto y = f(inputs);
    auto weights = random_tensor(rng, y.shape());
    backward(weighted_sum(y, weights));

    NoGradGuard guard;
    for (auto& x : inputs) {
        auto g = x.grad();
        auto values = x.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + options.eps;
            double plus = weighted_sum(f(inputs), weights).item();
            values[i] = saved - options.eps;
            double minus = weighted_sum(f(inputs), weights).item();
            values[i] = saved;
            double numeric = (plus - minus) / (2.0 * options.eps);
            row.max_rel_error = std::max(row.max_rel_error, relative_error(g[i], numeric, options.floor));
            ++row.n_checked;
        }
    }
    return row;
}

std::vector<GradcheckRow> gradcheck_operations(const GradcheckOptions& o) {
    Rng rng(derive_seed(o.seed, "gradcheck.inputs"));
    auto r = [&](Shape s, double scale = 1.0) { return random_tensor(rng, std::move(s), scale); };
    std::vector<GradcheckRow> rows;
    auto check = [&](const std::string& name, const GradFn& f, std::vector<Tensor64> in) {
        rows.push_back(check_function(name, f, std::move(in), o));
    };

    check("matmul", [](auto& x) { return matmul(x[0], x[1]); }, {r({3, 4}), r({4, 2})});
    check("matmul_batched", [](auto& x) { return matmul(x[0], x[1]); }, {r({2, 3, 4}), r({4, 5})});
    check("transpose", [](auto& x) { return transpose(x[0]); }, {r({2, 3, 4})});
    check("reshape", [](auto& x) { return reshape(x[0], {4, 3}); }, {r({2, 6})});
    check("add", [](auto& x) { return add(x[0], x[1]); }, {r({3, 4}), r({3, 4})});
    check("add_broadcast", [](auto& x) { return add(x[0], x[1]); }, {r({3, 4}), r({4})});
    check("sub", [](auto& x) { return sub(x[0], x[1]); }, {r({3, 4}), r({4})});
    check("mul", [](auto& x) { return mul(x[0], x[1]); }, {r({3, 4}), r({3, 4})});
    check("mul_broadcast", [](auto& x) { return mul(x[0], x[1]); }, {r({2, 3, 4}), r({3, 4})});
    check("scale", [](auto& x) { return scale(x[0], 0.37); }, {r({5})});
    check("gelu", [](auto& x) { return gelu(x[0]); }, {r({4, 5}, 2.0)});
    check("sigmoid", [](auto& x) { return sigmoid(x[0]); }, {r({4, 5}, 2.0)});
    check("softmax_lastdim", [](auto& x) { return softmax_lastdim(x[0]); }, {r({3, 5}, 2.0)});
    check("standardize_lastdim", [](auto& x) { return standardize_lastdim(x[0], 1e-5); }, {r({3, 6})});
    check("layer_norm", [](auto& x) { return layer_norm(x[0], x[1], x[2], 1e-5); }, {r({3, 6}), r({6}), r({6})});
    check("sum", [](auto& x) { return sum(x[0]); }, {r({3, 4})});
    check("mean", [](auto& x) { return mean(x[0]); }, {r({3, 4})});
    check("mean_over_axis0", [](auto& x) { return mean_over_axis(x[0], 0); }, {r({3, 4})});
    check("mean_over_axis1", [](auto& x) { return mean_over_axis(x[0], 1); }, {r({2, 3, 4})});
    check("stack", [](auto& x) { return stack(std::vector{x[0], x[1], x[2]}); }, {r({4}), r({4}), r({4})});
    check("concat_lastdim", [](auto& x) { return concat_lastdim(std::vector{x[0], x[1]}); }, {r({2, 3}), r({2, 5})});
    check("concat_rows", [](auto& x) { return concat_rows(std::vector{x[0], x[1]}); }, {r({2, 3}), r({1, 3})});
    check("select_rows", [](auto& x) { return select_rows(x[0], {2, 0, 2}); }, {r({3, 4})});
    check("row", [](auto& x) { return row(x[0], 1); }, {r({3, 4})});
    check("affine", [](auto& x) { return affine(x[0], x[1], x[2]); }, {r({3, 4}), r({4, 2}), r({2})});
    check("affine_vector", [](auto& x) { return affine(x[0], x[1], x[2]); }, {r({4}), r({4, 2}), r({2})});
    {
        auto targets = Tensor64::from_vector({1, 0, 0, 1, 1, 0}, {2, 3});
        check("bce_with_logits", [targets](auto& x) { return bce_with_logits(x[0], targets); }, {r({2, 3}, 3.0)});
    }

    // Composites: gradients with respect to the input tokens.
    {
        ParameterStore<double> store;
        Rng init(derive_seed(o.seed, "gradcheck.attention"));
        MultiHeadAttention<double> attn(store, "attn", 6, 2, init);
        check("multi_head_attention", [attn](auto& x) { return attn(x[0]); }, {r({4, 6})});
    }
    for (auto pos : {PosEncoding::none, PosEncoding::fixed, PosEncoding::learnable}) {
        for (auto pool : {Pooling::cls, Pooling::mean}) {
            EncoderConfig cfg;
            cfg.n_layers = 2;
            cfg.n_heads = 2;
            cfg.embed_dim = 6;
            cfg.pos_encoding = pos;
            cfg.pooling = pool;
            cfg.ffn_hidden = 8;
            ParameterStore<double> store;
            Rng init(derive_seed(o.seed, "gradcheck.encoder"));
            Encoder<double> enc(cfg, 3, store, "enc", init);
            check("encoder_" + std::string(to_string(pos)) + "_" + std::string(to_string(pool)),
                  [enc](auto& x) { return enc.encode(x[0]).pooled; }, {r({3, 6})});
        }
    }
    for (auto strategy : {FusionStrategy::visual_concat, FusionStrategy::separate_modalities,
                          FusionStrategy::concat_all}) {
        FusionConfig cfg;
        cfg.strategy = strategy;
        cfg.n_layers = 1;
        cfg.n_heads = 2;
        cfg.fuse_dim = 4;
        cfg.ffn_hidden = 6;
        ParameterStore<double> store;
        Rng init(derive_seed(o.seed, "gradcheck.fusion"));
        FusionTransformer<double> fusion(cfg, {"rgb", "flow"}, 3, 5, store, "fusion", init);
        check("fusion_" + std::string(to_string(strategy)),
              [fusion](auto& x) { return fusion.fuse({x[0], x[1]}, x[2]); }, {r({3}), r({3}), r({5})});
    }
    return rows;
}

ModelConfig gradcheck_reference_config(HierarchyStrategy strategy) {
    ModelConfig cfg;
    cfg.video.n_blocks = 3;
    cfg.video.block_size = 1;
    cfg.video.raw_dim_rgb = 5;
    cfg.video.raw_dim_flow = 4;
    cfg.video.encoder.n_layers = 1;
    cfg.video.encoder.n_heads = 2;
    cfg.video.encoder.embed_dim = 8;
    cfg.video.encoder.ffn_hidden = 8;
    cfg.fusion.n_layers = 1;
    cfg.fusion.n_heads = 2;
    cfg.fusion.fuse_dim = 8;
    cfg.fusion.ffn_hidden = 8;
    cfg.strategy = strategy;
    cfg.text_dim = 6;
    cfg.n_fine = 5;
    cfg.n_coarse = 2;
    cfg.trunk_dim = 8;
    return cfg;
}

GradcheckRow gradcheck_model(const ModelConfig& cfg, const std::string& name, const GradcheckOptions& o) {
    Model<double> model(cfg, derive_seed(o.seed, "gradcheck.model:" + name));
    Rng rng(derive_seed(o.seed, "gradcheck.model.inputs:" + name));
    // Generic point: initial CLS/position scales (0.02) make layer norm
    // sharply curved at the step size.
    for (auto& p : model.parameters().items()) {
        for (auto& v : p.tensor.mutable_data()) {
            v = 0.5 * rng.normal();
        }
    }
    ModelInputs<double> in;
    if (cfg.modalities.rgb) {
        in.rgb = random_tensor(rng, {cfg.video.n_blocks, cfg.video.raw_dim_rgb});
    }
    if (cfg.modalities.flow) {
        in.flow = random_tensor(rng, {cfg.video.n_blocks, cfg.video.raw_dim_flow});
    }
    if (cfg.modalities.text) {
        in.text = random_tensor(rng, {cfg.text_dim});
    }
    std::vector<double> yf(cfg.n_fine, 0.0), yc(cfg.n_coarse, 0.0);
    for (auto& y : yf) {
        y = rng.uniform() < 0.4 ? 1.0 : 0.0;
    }
    yf[rng.below(cfg.n_fine)] = 1.0;
    for (auto& y : yc) {
        y = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    auto y_fine = Tensor64::from_vector(yf, {cfg.n_fine});
    auto y_coarse = Tensor64::from_vector(yc, {cfg.n_coarse});
    auto loss_of = [&] { return joint_loss(model.forward(in), y_fine, y_coarse); };

    auto& store = model.parameters();
    store.zero_grad();
    backward(loss_of());

    GradcheckRow row{name, 0, store.total_elements(), 0.0, o.tolerance};
    NoGradGuard guard;
    for (auto& p : store.items()) {
        auto g = p.tensor.grad();
        auto values = p.tensor.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + o.eps;
            double plus = loss_of().item();
            values[i] = saved - o.eps;
            double minus = loss_of().item();
            values[i] = saved;
            double numeric = (plus - minus) / (2.0 * o.eps);
            row.max_rel_error = std::max(row.max_rel_error, relative_error(g[i], numeric, o.floor));
            ++row.n_checked;
        }
    }
    return row;
}

std::vector<GradcheckRow> gradcheck_suite(const GradcheckOptions& options) {
    auto rows = gradcheck_operations(options);
    for (auto s : {HierarchyStrategy::contextual_data, HierarchyStrategy::separate_fusion,
                   HierarchyStrategy::separate_classifier, HierarchyStrategy::shared_classifier}) {
        rows.push_back(gradcheck_model(gradcheck_reference_config(s), "model_" + std::string(to_string(s)), options));
    }
    auto visual = gradcheck_reference_config(HierarchyStrategy::separate_classifier);
    visual.modalities = ModalitySet{true, true, false};
    visual.video.visual_fusion = VisualFusion::early;
    visual.video.encoder.pos_encoding = PosEncoding::fixed;
    visual.video.encoder.pooling = Pooling::mean;
    rows.push_back(gradcheck_model(visual, "model_visual_early", options));
    return rows;
}

} // namespace hieract
