#include "hieract/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "hieract/errors.hpp"

namespace hieract {

namespace {

thread_local bool g_grad_enabled = true;

} // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) {
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out << (i ? "x" : "") << shape[i];
    }
    out << ']';
    return out.str();
}

// ---- BasicTensor ----------------------------------------------------------

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return from_vector(std::vector<T>(n, value), std::move(shape), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_vector(std::vector<T> values, Shape shape, bool requires_grad) {
    for (auto e : shape) {
        if (e == 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
        }
    }
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("shape " + shape_str(shape) + " does not hold " + std::to_string(values.size()) +
                             " values");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
    return from_vector({value}, {}, requires_grad);
}

template <typename T>
T BasicTensor<T>::item() const {
    if (numel() != 1) {
        throw DimensionError("item() needs a single-element tensor, got " + shape_str(shape()));
    }
    return node_->data[0];
}

template <typename T>
void BasicTensor<T>::zero_grad() {
    node_->grad.assign(node_->data.size(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach(bool requires_grad) const {
    return from_vector(node_->data, node_->shape, requires_grad);
}

// ---- graph helpers -------------------------------------------------------

namespace {

template <typename T>
using NodePtr = std::shared_ptr<typename BasicTensor<T>::Node>;

template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> data, std::vector<const BasicTensor<T>*> inputs,
                           std::function<void(typename BasicTensor<T>::Node&)> backward_fn) {
    auto node = std::make_shared<typename BasicTensor<T>::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    if (grad_enabled()) {
        bool any = std::any_of(inputs.begin(), inputs.end(), [](const BasicTensor<T>* t) { return t->requires_grad(); });
        if (any) {
            node->requires_grad = true;
            node->parents.reserve(inputs.size());
            for (const auto* t : inputs) {
                node->parents.push_back(t->node());
            }
            node->backward = std::move(backward_fn);
        }
    }
    return BasicTensor<T>(std::move(node));
}

void require_defined(bool defined, const char* op) {
    if (!defined) {
        throw ContractError(std::string(op) + ": undefined tensor operand");
    }
}

// Suffix broadcasting for elementwise binaries.
struct BinaryLayout {
    Shape out;
    std::size_t a_period; // a index = i % a_period
    std::size_t b_period;
};

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) {
        return false;
    }
    return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

BinaryLayout binary_layout(const Shape& a, const Shape& b, const char* op) {
    std::size_t na = shape_numel(a);
    std::size_t nb = shape_numel(b);
    if (a == b) {
        return {a, na, nb};
    }
    if (is_suffix(b, a)) {
        return {a, na, nb};
    }
    if (is_suffix(a, b)) {
        return {b, na, nb};
    }
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            T av = a[i * k + p];
            if (av == T(0)) {
                continue;
            }
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

// c(m x k) += g(m x n) * b(k x n)^T
template <typename T>
void gemm_acc_bt(const T* g, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T* brow = b + p * n;
            T acc = T(0);
            for (std::size_t j = 0; j < n; ++j) {
                acc += grow[j] * brow[j];
            }
            c[i * k + p] += acc;
        }
    }
}

// c(k x n) += a(m x k)^T * g(m x n)
template <typename T>
void gemm_acc_at(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            T av = a[i * k + p];
            if (av == T(0)) {
                continue;
            }
            T* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * grow[j];
            }
        }
    }
}

// Pairs of (a batch index, b batch index) for each output batch entry.
struct BatchPlan {
    Shape batch;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

BatchPlan plan_batches(const Shape& a, const Shape& b) {
    Shape ab(a.begin(), a.end() - 2);
    Shape bb(b.begin(), b.end() - 2);
    std::size_t rank = std::max(ab.size(), bb.size());
    Shape pa(rank - ab.size(), 1);
    pa.insert(pa.end(), ab.begin(), ab.end());
    Shape pb(rank - bb.size(), 1);
    pb.insert(pb.end(), bb.begin(), bb.end());
    BatchPlan plan;
    plan.batch.resize(rank);
    for (std::size_t d = 0; d < rank; ++d) {
        if (pa[d] != pb[d] && pa[d] != 1 && pb[d] != 1) {
            throw DimensionError("matmul: batch extents of " + shape_str(a) + " and " + shape_str(b) +
                                 " do not broadcast");
        }
        plan.batch[d] = std::max(pa[d], pb[d]);
    }
    std::size_t total = shape_numel(plan.batch);
    plan.pairs.reserve(total);
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t ia = 0;
        std::size_t ib = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            ia = ia * pa[d] + (pa[d] == 1 ? 0 : idx[d]);
            ib = ib * pb[d] + (pb[d] == 1 ? 0 : idx[d]);
        }
        plan.pairs.emplace_back(ia, ib);
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < plan.batch[d]) {
                break;
            }
            idx[d] = 0;
        }
    }
    return plan;
}

template <typename T>
T erf_t(T x) {
    return static_cast<T>(std::erf(static_cast<double>(x)));
}

} // namespace

// ---- linear algebra ------------------------------------------------------

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_defined(a.defined() && b.defined(), "matmul");
    if (a.rank() < 2 || b.rank() < 2) {
        throw DimensionError("matmul: operands need rank >= 2, got " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    std::size_t m = a.shape()[a.rank() - 2];
    std::size_t k = a.shape()[a.rank() - 1];
    std::size_t k2 = b.shape()[b.rank() - 2];
    std::size_t n = b.shape()[b.rank() - 1];
    if (k != k2) {
        throw DimensionError("matmul: inner extents differ for " + shape_str(a.shape()) + " @ " +
                             shape_str(b.shape()));
    }
    BatchPlan plan = plan_batches(a.shape(), b.shape());
    Shape out_shape = plan.batch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::vector<T> out(plan.pairs.size() * m * n, T(0));
    const T* ad = a.data().data();
    const T* bd = b.data().data();
    for (std::size_t s = 0; s < plan.pairs.size(); ++s) {
        gemm_acc(ad + plan.pairs[s].first * m * k, bd + plan.pairs[s].second * k * n, out.data() + s * m * n, m, k, n);
    }
    auto pairs = std::move(plan.pairs);
    return make_result<T>(std::move(out_shape), std::move(out), {&a, &b},
                          [pairs, m, k, n](typename BasicTensor<T>::Node& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              for (std::size_t s = 0; s < pairs.size(); ++s) {
                                  const T* g = self.grad.data() + s * m * n;
                                  if (pa.requires_grad) {
                                      gemm_acc_bt(g, pb.data.data() + pairs[s].second * k * n,
                                                  pa.grad.data() + pairs[s].first * m * k, m, k, n);
                                  }
                                  if (pb.requires_grad) {
                                      gemm_acc_at(pa.data.data() + pairs[s].first * m * k, g,
                                                  pb.grad.data() + pairs[s].second * k * n, m, k, n);
                                  }
                              }
                          });
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& x) {
    require_defined(x.defined(), "transpose");
    if (x.rank() < 2) {
        throw DimensionError("transpose: rank >= 2 required, got " + shape_str(x.shape()));
    }
    std::size_t r = x.shape()[x.rank() - 2];
    std::size_t c = x.shape()[x.rank() - 1];
    std::size_t batches = x.numel() / (r * c);
    Shape out_shape = x.shape();
    std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
    std::vector<T> out(x.numel());
    const T* xd = x.data().data();
    for (std::size_t s = 0; s < batches; ++s) {
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                out[s * r * c + j * r + i] = xd[s * r * c + i * c + j];
            }
        }
    }
    return make_result<T>(std::move(out_shape), std::move(out), {&x}, [r, c, batches](auto& self) {
        auto& px = *self.parents[0];
        for (std::size_t s = 0; s < batches; ++s) {
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    px.grad[s * r * c + i * c + j] += self.grad[s * r * c + j * r + i];
                }
            }
        }
    });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
    require_defined(x.defined(), "reshape");
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    return make_result<T>(std::move(shape), x.to_vector(), {&x}, [](auto& self) {
        auto& px = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            px.grad[i] += self.grad[i];
        }
    });
}

// ---- elementwise ---------------------------------------------------------

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_defined(a.defined() && b.defined(), "add");
    BinaryLayout lay = binary_layout(a.shape(), b.shape(), "add");
    std::size_t n = shape_numel(lay.out);
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a[i % lay.a_period] + b[i % lay.b_period];
    }
    return make_result<T>(lay.out, std::move(out), {&a, &b}, [lay, n](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < n; ++i) {
            if (pa.requires_grad) {
                pa.grad[i % lay.a_period] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.grad[i % lay.b_period] += self.grad[i];
            }
        }
    });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_defined(a.defined() && b.defined(), "sub");
    BinaryLayout lay = binary_layout(a.shape(), b.shape(), "sub");
    std::size_t n = shape_numel(lay.out);
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a[i % lay.a_period] - b[i % lay.b_period];
    }
    return make_result<T>(lay.out, std::move(out), {&a, &b}, [lay, n](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < n; ++i) {
            if (pa.requires_grad) {
                pa.grad[i % lay.a_period] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.grad[i % lay.b_period] -= self.grad[i];
            }
        }
    });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_defined(a.defined() && b.defined(), "mul");
    BinaryLayout lay = binary_layout(a.shape(), b.shape(), "mul");
    std::size_t n = shape_numel(lay.out);
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a[i % lay.a_period] * b[i % lay.b_period];
    }
    return make_result<T>(lay.out, std::move(out), {&a, &b}, [lay, n](auto& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t ia = i % lay.a_period;
            std::size_t ib = i % lay.b_period;
            if (pa.requires_grad) {
                pa.grad[ia] += self.grad[i] * pb.data[ib];
            }
            if (pb.requires_grad) {
                pb.grad[ib] += self.grad[i] * pa.data[ia];
            }
        }
    });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
    require_defined(x.defined(), "scale");
    std::vector<T> out(x.data().begin(), x.data().end());
    for (auto& v : out) {
        v *= factor;
    }
    return make_result<T>(x.shape(), std::move(out), {&x}, [factor](auto& self) {
        auto& px = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            px.grad[i] += factor * self.grad[i];
        }
    });
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
    require_defined(x.defined(), "gelu");
    const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        T v = x[i];
        out[i] = T(0.5) * v * (T(1) + erf_t(v * inv_sqrt2));
    }
    return make_result<T>(x.shape(), std::move(out), {&x}, [inv_sqrt2](auto& self) {
        auto& px = *self.parents[0];
        const T inv_sqrt_2pi = static_cast<T>(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            T v = px.data[i];
            T cdf = T(0.5) * (T(1) + erf_t(v * inv_sqrt2));
            T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
            px.grad[i] += self.grad[i] * (cdf + v * pdf);
        }
    });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
    require_defined(x.defined(), "sigmoid");
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        T v = x[i];
        if (v >= T(0)) {
            out[i] = T(1) / (T(1) + std::exp(-v));
        } else {
            T e = std::exp(v);
            out[i] = e / (T(1) + e);
        }
    }
    return make_result<T>(x.shape(), std::move(out), {&x}, [](auto& self) {
        auto& px = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            T y = self.data[i];
            px.grad[i] += self.grad[i] * y * (T(1) - y);
        }
    });
}

template <typename T>
BasicTensor<T> softmax_lastdim(const BasicTensor<T>& x) {
    require_defined(x.defined(), "softmax_lastdim");
    if (x.rank() == 0) {
        throw DimensionError("softmax_lastdim: rank >= 1 required");
    }
    std::size_t width = x.shape().back();
    std::size_t rows = x.numel() / width;
    std::vector<T> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = x.data().data() + r * width;
        T* o = out.data() + r * width;
        T peak = *std::max_element(in, in + width);
        T total = T(0);
        for (std::size_t j = 0; j < width; ++j) {
            o[j] = std::exp(in[j] - peak);
            total += o[j];
        }
        for (std::size_t j = 0; j < width; ++j) {
            o[j] /= total;
        }
    }
    return make_result<T>(x.shape(), std::move(out), {&x}, [rows, width](auto& self) {
        auto& px = *self.parents[0];
        for (std::size_t r = 0; r < rows; ++r) {
            const T* y = self.data.data() + r * width;
            const T* g = self.grad.data() + r * width;
            T dot = T(0);
            for (std::size_t j = 0; j < width; ++j) {
                dot += y[j] * g[j];
            }
            for (std::size_t j = 0; j < width; ++j) {
                px.grad[r * width + j] += y[j] * (g[j] - dot);
            }
        }
    });
}

template <typename T>
BasicTensor<T> standardize_lastdim(const BasicTensor<T>& x, T eps) {
    require_defined(x.defined(), "standardize_lastdim");
    if (x.rank() == 0) {
        throw DimensionError("standardize_lastdim: rank >= 1 required");
    }
    std::size_t width = x.shape().back();
    std::size_t rows = x.numel() / width;
    std::vector<T> out(x.numel());
    std::vector<T> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = x.data().data() + r * width;
        // Statistics in double regardless of T.
        double mu = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            mu += in[j];
        }
        mu /= static_cast<double>(width);
        double var = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            double d = in[j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(width);
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        inv_std[r] = static_cast<T>(inv);
        for (std::size_t j = 0; j < width; ++j) {
            out[r * width + j] = static_cast<T>((in[j] - mu) * inv);
        }
    }
    return make_result<T>(x.shape(), std::move(out), {&x}, [rows, width, inv_std = std::move(inv_std)](auto& self) {
        auto& px = *self.parents[0];
        for (std::size_t r = 0; r < rows; ++r) {
            const T* xh = self.data.data() + r * width;
            const T* g = self.grad.data() + r * width;
            T mean_g = T(0);
            T mean_gx = T(0);
            for (std::size_t j = 0; j < width; ++j) {
                mean_g += g[j];
                mean_gx += g[j] * xh[j];
            }
            mean_g /= static_cast<T>(width);
            mean_gx /= static_cast<T>(width);
            for (std::size_t j = 0; j < width; ++j) {
                px.grad[r * width + j] += inv_std[r] * (g[j] - mean_g - xh[j] * mean_gx);
            }
        }
    });
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias, T eps) {
    require_defined(x.defined() && gain.defined() && bias.defined(), "layer_norm");
    if (x.rank() == 0 || gain.shape() != Shape{x.shape().back()} || bias.shape() != Shape{x.shape().back()}) {
        throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " and bias " + shape_str(bias.shape()) +
                             " must match the last extent of " + shape_str(x.shape()));
    }
    return add(mul(standardize_lastdim(x, eps), gain), bias);
}

// ---- reductions ----------------------------------------------------------

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
    require_defined(x.defined(), "sum");
    T total = T(0);
    for (T v : x.data()) {
        total += v;
    }
    return make_result<T>({}, {total}, {&x}, [](auto& self) {
        auto& px = *self.parents[0];
        for (auto& g : px.grad) {
            g += self.grad[0];
        }
    });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
BasicTensor<T> mean_over_axis(const BasicTensor<T>& x, std::size_t axis) {
    require_defined(x.defined(), "mean_over_axis");
    if (axis >= x.rank()) {
        throw DimensionError("mean_over_axis: axis " + std::to_string(axis) + " out of range for " +
                             shape_str(x.shape()));
    }
    std::size_t outer = 1;
    std::size_t inner = 1;
    for (std::size_t d = 0; d < axis; ++d) {
        outer *= x.shape()[d];
    }
    for (std::size_t d = axis + 1; d < x.rank(); ++d) {
        inner *= x.shape()[d];
    }
    std::size_t len = x.shape()[axis];
    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    std::vector<T> out(outer * inner, T(0));
    const T inv = T(1) / static_cast<T>(len);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t l = 0; l < len; ++l) {
            const T* src = x.data().data() + (o * len + l) * inner;
            T* dst = out.data() + o * inner;
            for (std::size_t i = 0; i < inner; ++i) {
                dst[i] += src[i];
            }
        }
    }
    for (auto& v : out) {
        v *= inv;
    }
    return make_result<T>(std::move(out_shape), std::move(out), {&x}, [outer, inner, len, inv](auto& self) {
        auto& px = *self.parents[0];
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t l = 0; l < len; ++l) {
                T* dst = px.grad.data() + (o * len + l) * inner;
                const T* g = self.grad.data() + o * inner;
                for (std::size_t i = 0; i < inner; ++i) {
                    dst[i] += g[i] * inv;
                }
            }
        }
    });
}

// ---- structural ----------------------------------------------------------

template <typename T>
BasicTensor<T> stack(const std::vector<BasicTensor<T>>& parts) {
    if (parts.empty()) {
        throw DimensionError("stack: no operands");
    }
    for (const auto& p : parts) {
        require_defined(p.defined(), "stack");
        if (p.shape() != parts.front().shape()) {
            throw DimensionError("stack: shape " + shape_str(p.shape()) + " differs from " +
                                 shape_str(parts.front().shape()));
        }
    }
    std::size_t each = parts.front().numel();
    Shape out_shape{parts.size()};
    out_shape.insert(out_shape.end(), parts.front().shape().begin(), parts.front().shape().end());
    std::vector<T> out;
    out.reserve(each * parts.size());
    std::vector<const BasicTensor<T>*> inputs;
    for (const auto& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
        inputs.push_back(&p);
    }
    return make_result<T>(std::move(out_shape), std::move(out), std::move(inputs), [each](auto& self) {
        for (std::size_t s = 0; s < self.parents.size(); ++s) {
            auto& p = *self.parents[s];
            if (!p.requires_grad) {
                continue;
            }
            for (std::size_t i = 0; i < each; ++i) {
                p.grad[i] += self.grad[s * each + i];
            }
        }
    });
}

template <typename T>
BasicTensor<T> concat_lastdim(const std::vector<BasicTensor<T>>& parts) {
    if (parts.empty()) {
        throw DimensionError("concat_lastdim: no operands");
    }
    const Shape& first = parts.front().shape();
    if (first.empty()) {
        throw DimensionError("concat_lastdim: rank >= 1 required");
    }
    Shape lead(first.begin(), first.end() - 1);
    std::vector<std::size_t> widths;
    std::size_t total_width = 0;
    std::vector<const BasicTensor<T>*> inputs;
    for (const auto& p : parts) {
        require_defined(p.defined(), "concat_lastdim");
        Shape pl(p.shape().begin(), p.shape().end() - (p.rank() ? 1 : 0));
        if (p.rank() != first.size() || pl != lead) {
            throw DimensionError("concat_lastdim: shape " + shape_str(p.shape()) + " incompatible with " +
                                 shape_str(first));
        }
        widths.push_back(p.shape().back());
        total_width += p.shape().back();
        inputs.push_back(&p);
    }
    std::size_t rows = shape_numel(lead);
    std::vector<T> out(rows * total_width);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < parts.size(); ++s) {
        const T* src = parts[s].data().data();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy(src + r * widths[s], src + (r + 1) * widths[s], out.begin() + static_cast<std::ptrdiff_t>(r * total_width + offset));
        }
        offset += widths[s];
    }
    Shape out_shape = lead;
    out_shape.push_back(total_width);
    return make_result<T>(std::move(out_shape), std::move(out), std::move(inputs),
                          [rows, total_width, widths = std::move(widths)](auto& self) {
                              std::size_t off = 0;
                              for (std::size_t s = 0; s < self.parents.size(); ++s) {
                                  auto& p = *self.parents[s];
                                  if (p.requires_grad) {
                                      for (std::size_t r = 0; r < rows; ++r) {
                                          for (std::size_t j = 0; j < widths[s]; ++j) {
                                              p.grad[r * widths[s] + j] += self.grad[r * total_width + off + j];
                                          }
                                      }
                                  }
                                  off += widths[s];
                              }
                          });
}

template <typename T>
BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>& parts) {
    if (parts.empty()) {
        throw DimensionError("concat_rows: no operands");
    }
    const Shape& first = parts.front().shape();
    if (first.empty()) {
        throw DimensionError("concat_rows: rank >= 1 required");
    }
    Shape tail(first.begin() + 1, first.end());
    std::size_t total_rows = 0;
    std::vector<T> out;
    std::vector<const BasicTensor<T>*> inputs;
    for (const auto& p : parts) {
        require_defined(p.defined(), "concat_rows");
        if (p.rank() != first.size() || !std::equal(tail.begin(), tail.end(), p.shape().begin() + 1)) {
            throw DimensionError("concat_rows: shape " + shape_str(p.shape()) + " incompatible with " +
                                 shape_str(first));
        }
        total_rows += p.shape()[0];
        out.insert(out.end(), p.data().begin(), p.data().end());
        inputs.push_back(&p);
    }
    Shape out_shape = first;
    out_shape[0] = total_rows;
    return make_result<T>(std::move(out_shape), std::move(out), std::move(inputs), [](auto& self) {
        std::size_t offset = 0;
        for (auto& parent : self.parents) {
            std::size_t n = parent->data.size();
            if (parent->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) {
                    parent->grad[i] += self.grad[offset + i];
                }
            }
            offset += n;
        }
    });
}

template <typename T>
BasicTensor<T> select_rows(const BasicTensor<T>& x, const std::vector<std::size_t>& rows) {
    require_defined(x.defined(), "select_rows");
    if (x.rank() == 0 || rows.empty()) {
        throw DimensionError("select_rows: need rank >= 1 and at least one row");
    }
    std::size_t inner = x.numel() / x.shape()[0];
    std::vector<T> out;
    out.reserve(rows.size() * inner);
    for (auto r : rows) {
        if (r >= x.shape()[0]) {
            throw DimensionError("select_rows: row " + std::to_string(r) + " out of range for " + shape_str(x.shape()));
        }
        out.insert(out.end(), x.data().begin() + static_cast<std::ptrdiff_t>(r * inner),
                   x.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * inner));
    }
    Shape out_shape = x.shape();
    out_shape[0] = rows.size();
    return make_result<T>(std::move(out_shape), std::move(out), {&x}, [rows, inner](auto& self) {
        auto& px = *self.parents[0];
        for (std::size_t s = 0; s < rows.size(); ++s) {
            for (std::size_t i = 0; i < inner; ++i) {
                px.grad[rows[s] * inner + i] += self.grad[s * inner + i];
            }
        }
    });
}

template <typename T>
BasicTensor<T> row(const BasicTensor<T>& x, std::size_t index) {
    auto picked = select_rows(x, {index});
    Shape rest(x.shape().begin() + 1, x.shape().end());
    return reshape(picked, std::move(rest));
}

template <typename T>
BasicTensor<T> affine(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
    require_defined(x.defined() && weight.defined() && bias.defined(), "affine");
    if (weight.rank() != 2 || bias.shape() != Shape{weight.shape()[1]}) {
        throw DimensionError("affine: weight " + shape_str(weight.shape()) + " and bias " + shape_str(bias.shape()) +
                             " are not a matching (in x out, out) pair");
    }
    if (x.rank() == 1) {
        auto y = matmul(reshape(x, {1, x.shape()[0]}), weight);
        return add(reshape(y, {weight.shape()[1]}), bias);
    }
    return add(matmul(x, weight), bias);
}

template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& logits, const BasicTensor<T>& targets) {
    require_defined(logits.defined() && targets.defined(), "bce_with_logits");
    if (logits.shape() != targets.shape()) {
        throw DimensionError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs targets " +
                             shape_str(targets.shape()));
    }
    std::size_t n = logits.numel();
    // Running mean: exact when every term is equal.
    double average = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = logits[i];
        double y = targets[i];
        double term = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        average += (term - average) / static_cast<double>(i + 1);
    }
    return make_result<T>({}, {static_cast<T>(average)}, {&logits, &targets}, [n](auto& self) {
        auto& pz = *self.parents[0];
        auto& py = *self.parents[1];
        const T g = self.grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
            T z = pz.data[i];
            T s = z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
            if (pz.requires_grad) {
                pz.grad[i] += g * (s - py.data[i]);
            }
        }
    });
}

// ---- reverse pass --------------------------------------------------------

template <typename T>
void backward(const BasicTensor<T>& loss) {
    using Node = typename BasicTensor<T>::Node;
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar, got " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward: loss does not depend on any tensor that requires a gradient");
    }
    // Post-order DFS; reversed it is a topological order from the loss.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack_;
    Node* root = loss.node().get();
    stack_.emplace_back(root, 0);
    visited.insert(root);
    while (!stack_.empty()) {
        auto& [node, next] = stack_.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack_.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack_.pop_back();
        }
    }
    for (Node* node : order) {
        if (node->parents.empty()) {
            node->ensure_grad();
        } else {
            node->grad.assign(node->data.size(), T(0));
        }
    }
    root->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) {
            (*it)->backward(**it);
        }
    }
}

// ---- instantiation -------------------------------------------------------

#define HIERACT_INSTANTIATE_TENSOR(T)                                                                         \
    template class BasicTensor<T>;                                                                            \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                             \
    template BasicTensor<T> transpose(const BasicTensor<T>&);                                                 \
    template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                            \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                \
    template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                                \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                                \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                                  \
    template BasicTensor<T> gelu(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                   \
    template BasicTensor<T> softmax_lastdim(const BasicTensor<T>&);                                           \
    template BasicTensor<T> standardize_lastdim(const BasicTensor<T>&, T);                                    \
    template BasicTensor<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, T); \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                                       \
    template BasicTensor<T> mean(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> mean_over_axis(const BasicTensor<T>&, std::size_t);                               \
    template BasicTensor<T> stack(const std::vector<BasicTensor<T>>&);                                        \
    template BasicTensor<T> concat_lastdim(const std::vector<BasicTensor<T>>&);                               \
    template BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>&);                                  \
    template BasicTensor<T> select_rows(const BasicTensor<T>&, const std::vector<std::size_t>&);              \
    template BasicTensor<T> row(const BasicTensor<T>&, std::size_t);                                          \
    template BasicTensor<T> affine(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);      \
    template BasicTensor<T> bce_with_logits(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template void backward(const BasicTensor<T>&);

HIERACT_INSTANTIATE_TENSOR(float)
HIERACT_INSTANTIATE_TENSOR(double)

#undef HIERACT_INSTANTIATE_TENSOR

} // namespace hieract
