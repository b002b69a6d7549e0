#include <catch2/catch.hpp>

#include <cmath>
#include <numeric>

#include "hieract/errors.hpp"
#include "hieract/tensor.hpp"
#include "support.hpp"

using namespace hieract;
using testing::gaussian;
using testing::tensor64;

namespace {

// Naive row-major product, the oracle for matmul.
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t n,
                                 std::size_t k, std::size_t m) {
    std::vector<double> c(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t t = 0; t < k; ++t) c[i * m + j] += a[i * k + t] * b[t * m + j];
    return c;
}

double oracle_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

} // namespace

TEST_CASE("matmul matches hand values and a naive oracle", "[tensor]") {
    auto id = Tensor::from_vector({1, 0, 0, 1}, {2, 2});
    auto v = Tensor::from_vector({3, 4}, {2, 1});
    CHECK(matmul(id, v).to_vector() == std::vector<float>{3, 4});

    auto ones_row = Tensor::full({1, 3}, 1.0f);
    auto ones_col = Tensor::full({3, 1}, 1.0f);
    auto s = matmul(ones_row, ones_col);
    CHECK(s.shape() == Shape{1, 1});
    CHECK(s[0] == 3.0f);

    auto a = gaussian(12, 1), b = gaussian(20, 2);
    auto c = matmul(tensor64(a, {3, 4}, false), tensor64(b, {4, 5}, false));
    CHECK(testing::max_abs_diff(testing::to_doubles(c.data()), naive_matmul(a, b, 3, 4, 5)) < 1e-12);
}

TEST_CASE("matmul gradient of sum equals row sums of the right operand", "[tensor][grad]") {
    auto av = gaussian(20, 3), bv = gaussian(10, 4);
    auto a = tensor64(av, {4, 5});
    auto b = tensor64(bv, {5, 2}, false);
    backward(sum(matmul(a, b)));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t t = 0; t < 5; ++t) CHECK(a.grad()[i * 5 + t] == Approx(bv[t * 2] + bv[t * 2 + 1]).epsilon(1e-12));

    auto f = [&](const std::vector<double>& x) {
        double total = 0.0;
        for (double v : naive_matmul(x, bv, 4, 5, 2)) total += v;
        return total;
    };
    auto numeric = testing::numeric_gradient(f, av, 1e-3);
    CHECK(testing::max_abs_diff(numeric, testing::to_doubles(a.grad())) < 1e-8);
}

TEST_CASE("matmul rejects mismatched inner dimensions", "[tensor][errors]") {
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
    CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), DimensionError);
}

TEST_CASE("softmax is stable and matches a direct evaluation", "[tensor]") {
    auto u = softmax_lastdim(Tensor::zeros({3}));
    for (float p : u.data()) CHECK(p == Approx(1.0 / 3.0).epsilon(1e-7));

    auto big = softmax_lastdim(Tensor::from_vector({1000.0f, 0.0f}, {2}));
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == 1.0f);
    CHECK(big[1] == 0.0f);

    auto r = softmax_lastdim(Tensor::from_vector({1, 2, 3}, {3}));
    double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(r[i] - std::exp(i + 1.0) / z) < 1e-6);
}

TEST_CASE("layer norm handles constant slices and is shift invariant", "[tensor]") {
    auto gain = Tensor::full({4}, 1.0f);
    auto bias = Tensor::zeros({4});
    auto flat = layer_norm(Tensor::full({4}, 7.0f), gain, bias);
    for (float v : flat.data()) CHECK(v == 0.0f);

    auto pair = layer_norm(Tensor::from_vector({1, -1}, {2}), Tensor::full({2}, 1.0f), Tensor::zeros({2}));
    CHECK(pair[0] == Approx(1.0).epsilon(1e-5));
    CHECK(pair[1] == Approx(-1.0).epsilon(1e-5));

    auto xv = gaussian(8, 5);
    auto x = tensor64(xv, {2, 4}, false);
    std::vector<double> shifted(xv);
    for (auto& v : shifted) v += 3.25;
    auto g = Tensor64::full({4}, 1.0), b = Tensor64::zeros({4});
    auto y0 = layer_norm(x, g, b), y1 = layer_norm(tensor64(shifted, {2, 4}, false), g, b);
    CHECK(testing::max_abs_diff(testing::to_doubles(y0.data()), testing::to_doubles(y1.data())) < 1e-5);

    CHECK_THROWS_AS(layer_norm(Tensor::zeros({2, 3}), Tensor::zeros({4}), Tensor::zeros({4})), DimensionError);
}

TEST_CASE("elementwise activations match analytic values", "[tensor]") {
    CHECK(gelu(Tensor::scalar(0.0f)).item() == 0.0f);
    CHECK(sigmoid(Tensor::scalar(0.0f)).item() == 0.5f);
    auto xv = gaussian(9, 6, 2.0);
    auto y = gelu(tensor64(xv, {9}, false));
    for (std::size_t i = 0; i < xv.size(); ++i) CHECK(y[i] == Approx(oracle_gelu(xv[i])).epsilon(1e-12));
    auto s = sigmoid(tensor64(xv, {9}, false));
    for (std::size_t i = 0; i < xv.size(); ++i) CHECK(s[i] == Approx(1.0 / (1.0 + std::exp(-xv[i]))).epsilon(1e-12));
}

TEST_CASE("structural operations have the documented shapes", "[tensor]") {
    auto a = Tensor::full({4}, 1.0f), b = Tensor::full({4}, 2.0f);
    auto st = stack<float>({a, b});
    CHECK(st.shape() == Shape{2, 4});
    CHECK(st[4] == 2.0f);
    auto cat = concat_lastdim<float>({Tensor::zeros({2, 3}), Tensor::full({2, 1}, 5.0f)});
    CHECK(cat.shape() == Shape{2, 4});
    CHECK(cat[3] == 5.0f);
    CHECK(cat[7] == 5.0f);
    auto rows = concat_rows<float>({Tensor::zeros({1, 3}), Tensor::full({2, 3}, 1.0f)});
    CHECK(rows.shape() == Shape{3, 3});
    auto m = mean_over_axis(Tensor::from_vector({1, 2, 3, 5}, {2, 2}), 0);
    CHECK(m.to_vector() == std::vector<float>{2, 3.5});
    auto t = transpose(Tensor::from_vector({1, 2, 3, 4, 5, 6}, {2, 3}));
    CHECK(t.shape() == Shape{3, 2});
    CHECK(t.to_vector() == std::vector<float>{1, 4, 2, 5, 3, 6});
    auto sel = select_rows(Tensor::from_vector({1, 2, 3, 4}, {2, 2}), {1, 1, 0});
    CHECK(sel.to_vector() == std::vector<float>{3, 4, 3, 4, 1, 2});
    CHECK_THROWS_AS(stack<float>({Tensor::zeros({2}), Tensor::zeros({3})}), DimensionError);
    CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {4}), DimensionError);
}

TEST_CASE("broadcasting adds a suffix-shaped operand over leading axes", "[tensor]") {
    auto x = Tensor::from_vector({1, 2, 3, 4, 5, 6}, {2, 3});
    auto b = Tensor::from_vector({10, 20, 30}, {3});
    CHECK(add(x, b).to_vector() == std::vector<float>{11, 22, 33, 14, 25, 36});
    auto bg = tensor64({1, 1, 1}, {3});
    auto xg = tensor64({1, 2, 3, 4, 5, 6}, {2, 3}, false);
    backward(sum(add(xg, bg)));
    CHECK(testing::to_doubles(bg.grad()) == std::vector<double>{2, 2, 2});
}

TEST_CASE("affine matches x W + b for rows and single vectors", "[tensor]") {
    auto xv = gaussian(6, 7), wv = gaussian(12, 8), bv = gaussian(4, 9);
    auto y = affine(tensor64(xv, {2, 3}, false), tensor64(wv, {3, 4}, false), tensor64(bv, {4}, false));
    auto oracle = naive_matmul(xv, wv, 2, 3, 4);
    for (std::size_t i = 0; i < 8; ++i) oracle[i] += bv[i % 4];
    CHECK(testing::max_abs_diff(testing::to_doubles(y.data()), oracle) < 1e-12);
    auto v = affine(tensor64({xv[0], xv[1], xv[2]}, {3}, false), tensor64(wv, {3, 4}, false), tensor64(bv, {4}, false));
    CHECK(v.shape() == Shape{4});
    CHECK(v[2] == Approx(oracle[2]).epsilon(1e-12));
}

TEST_CASE("backward on simple losses gives analytic gradients", "[tensor][grad]") {
    auto pv = gaussian(5, 10);
    auto p = tensor64(pv, {5});
    backward(sum(p));
    for (double g : p.grad()) CHECK(g == 1.0);

    auto q = tensor64(pv, {5});
    backward(scale(sum(mul(q, q)), 0.5));
    for (std::size_t i = 0; i < 5; ++i) CHECK(q.grad()[i] == Approx(pv[i]).epsilon(1e-12));

    CHECK_THROWS_AS(backward(mul(q, q)), ContractError);
}

TEST_CASE("leaf gradients accumulate across backward calls", "[tensor][grad]") {
    auto p = tensor64({1, 2}, {2});
    backward(sum(p));
    backward(sum(p));
    CHECK(testing::to_doubles(p.grad()) == std::vector<double>{2, 2});
    p.zero_grad();
    CHECK(testing::to_doubles(p.grad()) == std::vector<double>{0, 0});
}

TEST_CASE("mean_over_axis gradient agrees with central differences", "[tensor][grad]") {
    auto xv = gaussian(12, 11);
    auto w = gaussian(4, 12);
    auto x = tensor64(xv, {3, 4});
    backward(sum(mul(mean_over_axis(x, 0), tensor64(w, {4}, false))));
    auto f = [&](const std::vector<double>& v) {
        double total = 0.0;
        for (std::size_t j = 0; j < 4; ++j) total += w[j] * (v[j] + v[4 + j] + v[8 + j]) / 3.0;
        return total;
    };
    auto numeric = testing::numeric_gradient(f, xv, 1e-3);
    for (std::size_t i = 0; i < 12; ++i) {
        double a = x.grad()[i];
        CHECK(std::abs(a - numeric[i]) / std::max(std::abs(numeric[i]), 1e-12) < 1e-4);
    }
}

TEST_CASE("bce_with_logits matches the direct formula", "[tensor]") {
    auto zv = gaussian(7, 13, 3.0);
    std::vector<double> yv{1, 0, 0, 1, 1, 0, 1};
    auto loss = bce_with_logits(tensor64(zv, {7}, false), tensor64(yv, {7}, false)).item();
    double oracle = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
        double p = 1.0 / (1.0 + std::exp(-zv[i]));
        oracle -= yv[i] * std::log(p) + (1 - yv[i]) * std::log(1 - p);
    }
    CHECK(std::abs(loss - oracle / 7.0) < 1e-12);
}

TEST_CASE("no-grad guard builds no graph", "[tensor][grad]") {
    auto p = tensor64({1, 2}, {2});
    {
        NoGradGuard guard;
        CHECK_FALSE(grad_enabled());
        auto y = mul(p, p);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(grad_enabled());
    CHECK(mul(p, p).requires_grad());
}

TEST_CASE("detach and cast produce fresh leaves", "[tensor]") {
    auto p = tensor64({1.5, -2.0}, {2});
    auto y = mul(p, p);
    auto d = y.detach(true);
    CHECK(d.node()->parents.empty());
    auto f = cast<float>(p);
    CHECK(f.to_vector() == std::vector<float>{1.5f, -2.0f});
    CHECK_FALSE(f.requires_grad());
}
