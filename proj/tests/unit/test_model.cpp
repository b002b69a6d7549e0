#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "hieract/errors.hpp"
#include "hieract/gradcheck.hpp"
#include "hieract/model.hpp"
#include "support.hpp"

using namespace hieract;
using testing::gaussian;
using testing::tensor64;

namespace {

ModelInputs<double> random_inputs(const ModelConfig& c, std::uint32_t seed) {
    ModelInputs<double> in;
    const auto& v = c.video;
    if (c.modalities.rgb || v.visual_fusion == VisualFusion::early)
        in.rgb = tensor64(gaussian(v.n_blocks * v.raw_dim_rgb, seed), {v.n_blocks, v.raw_dim_rgb}, false);
    if (c.modalities.flow || v.visual_fusion == VisualFusion::early)
        in.flow = tensor64(gaussian(v.n_blocks * v.raw_dim_flow, seed + 1), {v.n_blocks, v.raw_dim_flow}, false);
    if (c.modalities.text) in.text = tensor64(gaussian(c.text_dim, seed + 2), {c.text_dim}, false);
    return in;
}

// Direct evaluation of mean BCE in double precision.
double oracle_bce(const std::vector<double>& z, const std::vector<double>& y) {
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double p = 1.0 / (1.0 + std::exp(-z[i]));
        total -= y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p);
    }
    return total / static_cast<double>(z.size());
}

} // namespace

TEST_CASE("strategy and modality names round-trip", "[model]") {
    for (auto s : {HierarchyStrategy::contextual_data, HierarchyStrategy::separate_fusion,
                   HierarchyStrategy::separate_classifier, HierarchyStrategy::shared_classifier})
        CHECK(parse_hierarchy_strategy(to_string(s)) == s);
    CHECK_THROWS_AS(parse_hierarchy_strategy("joint"), ConfigError);
    auto m = ModalitySet::parse("rgb+text");
    CHECK(m.rgb);
    CHECK_FALSE(m.flow);
    CHECK(m.text);
    CHECK(m.to_string() == "rgb+text");
    CHECK(ModalitySet::parse("flow+rgb+text") == ModalitySet{});
    CHECK_THROWS_AS(ModalitySet::parse("rgb+audio"), ConfigError);
}

TEST_CASE("model config validation", "[model][errors]") {
    auto c = gradcheck_reference_config();
    c.modalities = ModalitySet::parse("text");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = gradcheck_reference_config();
    c.modalities = ModalitySet::parse("rgb+flow");
    CHECK_THROWS_AS(c.validate(), ConfigError); // contextual_data needs text
    c = gradcheck_reference_config(HierarchyStrategy::separate_classifier);
    c.modalities = ModalitySet::parse("rgb+text");
    c.video.visual_fusion = VisualFusion::early;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("documented full-size configuration yields 51 fine and 7 coarse logits", "[model][slow]") {
    ModelConfig c; // rgb+flow+text, contextual_data, joint loss
    c.video.encoder.n_layers = 1; // shapes do not depend on depth
    c.fusion.n_layers = 1;
    c.video.n_blocks = 2;
    Model<float> model(c, 0);
    ModelInputs<float> in{Tensor::zeros({2, 1280}), Tensor::zeros({2, 2048}), Tensor::zeros({768})};
    auto z = model.forward(in);
    CHECK(z.fine.shape() == Shape{51});
    CHECK(z.coarse.shape() == Shape{7});
}

TEST_CASE("visual-only model without joint loss has no coarse head", "[model]") {
    auto c = gradcheck_reference_config(HierarchyStrategy::separate_classifier);
    c.modalities = ModalitySet::parse("rgb");
    c.joint_loss = false;
    Model<double> model(c, 1);
    auto z = model.forward(random_inputs(c, 1));
    CHECK_FALSE(z.has_coarse());
    CHECK_FALSE(model.parameters().contains("head.coarse.weight"));
    auto yf = tensor64({1, 0, 0, 0, 0}, {5}, false);
    CHECK(joint_loss(z, yf, Tensor64{}).item() == Approx(oracle_bce(testing::to_doubles(z.fine.data()),
                                                                    {1, 0, 0, 0, 0}))
                                                        .epsilon(1e-12));
    CHECK_THROWS_AS(model.forward(ModelInputs<double>{}), DimensionError);
}

TEST_CASE("zeroed parameters give all-zero logits", "[model]") {
    for (auto s : {HierarchyStrategy::contextual_data, HierarchyStrategy::separate_fusion,
                   HierarchyStrategy::separate_classifier, HierarchyStrategy::shared_classifier}) {
        auto c = gradcheck_reference_config(s);
        Model<double> model(c, 2);
        for (auto& p : model.parameters().items()) std::fill(p.tensor.mutable_data().begin(), p.tensor.mutable_data().end(), 0.0);
        auto z = model.forward(random_inputs(c, 3));
        for (double v : z.fine.data()) CHECK(v == 0.0);
        for (double v : z.coarse.data()) CHECK(v == 0.0);
    }
}

TEST_CASE("joint loss contract", "[model][loss]") {
    Logits<double> zero{Tensor64::zeros({51}), Tensor64::zeros({7})};
    std::vector<double> yf(51, 0.0), yc(7, 0.0);
    yf[3] = 1;
    yc[1] = 1;
    double loss = joint_loss(zero, tensor64(yf, {51}, false), tensor64(yc, {7}, false)).item();
    CHECK(loss == 2.0 * std::log(2.0));

    std::vector<double> zf(51), zc(7);
    for (std::size_t i = 0; i < 51; ++i) zf[i] = yf[i] ? 40.0 : -40.0;
    for (std::size_t i = 0; i < 7; ++i) zc[i] = yc[i] ? 40.0 : -40.0;
    Logits<double> sat{tensor64(zf, {51}, false), tensor64(zc, {7}, false)};
    CHECK(joint_loss(sat, tensor64(yf, {51}, false), tensor64(yc, {7}, false)).item() < 1e-10);

    auto rf = gaussian(51, 5, 2.0), rc = gaussian(7, 6, 2.0);
    Logits<double> rnd{tensor64(rf, {51}, false), tensor64(rc, {7}, false)};
    double got = joint_loss(rnd, tensor64(yf, {51}, false), tensor64(yc, {7}, false)).item();
    CHECK(std::abs(got - (oracle_bce(rf, yf) + oracle_bce(rc, yc))) < 1e-6);
    double parts = head_loss(rnd.fine, tensor64(yf, {51}, false)).item() + head_loss(rnd.coarse, tensor64(yc, {7}, false)).item();
    CHECK(std::abs(got - parts) < 1e-7);

    CHECK_THROWS_AS(joint_loss(rnd, Tensor64::zeros({51}), tensor64(yc, {7}, false)), ContractError);
    CHECK_THROWS_AS(joint_loss(rnd, tensor64(yf, {51}, false), Tensor64{}), ContractError);
    auto bad = yf;
    bad[0] = 0.5;
    CHECK_THROWS_AS(head_loss(rnd.fine, tensor64(bad, {51}, false)), ContractError);
}

TEST_CASE("contextual_data coarse loss leaves visual parameters untouched", "[model][loss]") {
    auto c = gradcheck_reference_config(HierarchyStrategy::contextual_data);
    Model<double> model(c, 4);
    auto z = model.forward(random_inputs(c, 7));
    model.parameters().zero_grad();
    backward(head_loss(z.coarse, tensor64({0, 1}, {2}, false)));
    auto visual = model.visual_parameter_names();
    REQUIRE_FALSE(visual.empty());
    for (const auto& name : visual)
        for (double g : model.parameters().get(name).tensor.grad()) CHECK(g == 0.0);
    auto g = model.parameters().get("head.coarse.weight").tensor.grad();
    CHECK(std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; }));
}

TEST_CASE("shared and separate heads wire the coarse logits as documented", "[model]") {
    auto shared = gradcheck_reference_config(HierarchyStrategy::shared_classifier);
    Model<double> m1(shared, 5);
    CHECK(m1.parameters().contains("head.trunk.weight"));
    CHECK(m1.parameters().get("head.coarse.weight").tensor.shape() == Shape{shared.trunk_dim, 2});

    auto sep = gradcheck_reference_config(HierarchyStrategy::separate_fusion);
    Model<double> m2(sep, 5);
    CHECK(m2.parameters().contains("fusion.fine.proj.text.weight"));
    CHECK(m2.parameters().contains("fusion.coarse.proj.text.weight"));

    auto ctx = gradcheck_reference_config(HierarchyStrategy::contextual_data);
    Model<double> m3(ctx, 5);
    CHECK(m3.parameters().get("head.coarse.weight").tensor.shape() == Shape{ctx.text_dim, 2});
}

TEST_CASE("model construction is seed deterministic", "[model]") {
    auto c = gradcheck_reference_config();
    Model<float> a(c, 9), b(c, 9), d(c, 10);
    CHECK(a.parameters().snapshot() == b.parameters().snapshot());
    CHECK(a.parameters().snapshot() != d.parameters().snapshot());
}

TEST_CASE("top-k ranking breaks ties by index", "[model]") {
    std::vector<float> onehot(51, 0.0f);
    onehot[7] = 1.0f;
    CHECK(predict_topk(std::span<const float>(onehot), 1) == std::vector<std::size_t>{7});
    std::vector<float> flat(10, 0.25f);
    CHECK(predict_topk(std::span<const float>(flat), 3) == std::vector<std::size_t>{0, 1, 2});
    CHECK_THROWS_AS(predict_topk(std::span<const float>(flat), 0), ContractError);
    CHECK_THROWS_AS(predict_topk(std::span<const float>(flat), 11), ContractError);

    auto r = gaussian(40, 8);
    std::vector<std::size_t> order(40);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
    auto top = predict_topk(std::span<const double>(r), 10);
    CHECK(top == std::vector<std::size_t>(order.begin(), order.begin() + 10));

    Logits<double> z{tensor64(r, {40}, false), tensor64({0.1, 0.3}, {2}, false)};
    auto ranking = rank_logits(z, 5);
    CHECK(ranking.fine.size() == 5);
    CHECK(ranking.coarse == std::vector<std::size_t>{1, 0});
}

TEST_CASE("model gradients match finite differences on the reference config", "[model][grad]") {
    GradcheckOptions opt;
    auto row = gradcheck_model(gradcheck_reference_config(HierarchyStrategy::contextual_data), "contextual_data", opt);
    CHECK(row.n_checked == row.n_parameters);
    CHECK(row.n_parameters <= 10000);
    CHECK(row.passed());
}
