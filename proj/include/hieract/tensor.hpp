#pragma once

// Dense row-major tensors with define-by-run reverse-mode differentiation.
//
// A BasicTensor is a cheap handle onto a shared graph node. Every operation
// allocates a new node holding its value and, when any input requires a
// gradient, a closure that pushes the node's gradient into its parents.
// backward() walks the graph from a scalar loss in reverse topological
// order. Leaf gradients accumulate across calls; intermediate gradients are
// reset at the start of each call.
//
// Storage is templated on the scalar type so the same graph code can run
// in float for training and in double for gradient checking.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hieract {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// While alive, operations on the current thread build no graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

template <typename T>
class BasicTensor {
public:
    struct Node {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad; // empty until allocated
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward;

        void ensure_grad() {
            if (grad.size() != data.size()) {
                grad.assign(data.size(), T(0));
            }
        }
    };

    BasicTensor() = default;

    static BasicTensor zeros(Shape shape, bool requires_grad = false);
    static BasicTensor full(Shape shape, T value, bool requires_grad = false);
    static BasicTensor from_vector(std::vector<T> values, Shape shape, bool requires_grad = false);
    static BasicTensor scalar(T value, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const T> data() const { return node_->data; }
    std::span<T> mutable_data() { return node_->data; }
    std::vector<T> to_vector() const { return node_->data; }
    T item() const;
    T operator[](std::size_t flat) const { return node_->data[flat]; }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->grad.size() == node_->data.size() && !node_->data.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->grad; }
    /// Allocate (if needed) and zero the gradient buffer.
    void zero_grad();
    /// Release the gradient buffer; has_grad() becomes false.
    void drop_grad() { node_->grad.clear(); }

    /// Same values, fresh leaf with no history.
    BasicTensor detach(bool requires_grad = false) const;

    const std::shared_ptr<Node>& node() const { return node_; }
    explicit BasicTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Convert values across scalar types. The result is a leaf.
template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& x, bool requires_grad = false) {
    std::vector<To> values(x.data().begin(), x.data().end());
    return BasicTensor<To>::from_vector(std::move(values), x.shape(), requires_grad);
}

// ---- differentiable operations -------------------------------------------

/// Matrix product over the last two axes; leading axes broadcast.
template <typename T> BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// Swap the last two axes.
template <typename T> BasicTensor<T> transpose(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

// Elementwise binaries. Shapes must match, or one shape must be a trailing
// suffix of the other (the smaller operand broadcasts over leading axes).
template <typename T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> scale(const BasicTensor<T>& x, T factor);

template <typename T> BasicTensor<T> gelu(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> sigmoid(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> softmax_lastdim(const BasicTensor<T>& x);
/// (x - mean) / sqrt(var + eps) over the last axis, biased variance.
template <typename T> BasicTensor<T> standardize_lastdim(const BasicTensor<T>& x, T eps);
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain, const BasicTensor<T>& bias,
                          T eps = T(1e-5));

/// Rank-0 sum / mean of all entries.
template <typename T> BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> mean(const BasicTensor<T>& x);
/// Mean along one axis; that axis is removed from the shape.
template <typename T> BasicTensor<T> mean_over_axis(const BasicTensor<T>& x, std::size_t axis);

/// Stack equal-shaped tensors along a new leading axis.
template <typename T> BasicTensor<T> stack(const std::vector<BasicTensor<T>>& parts);
/// Concatenate along the last axis; leading shapes must agree.
template <typename T> BasicTensor<T> concat_lastdim(const std::vector<BasicTensor<T>>& parts);
/// Concatenate along the leading axis; trailing shapes must agree.
template <typename T> BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>& parts);
/// Gather entries of the leading axis (repeats allowed).
template <typename T> BasicTensor<T> select_rows(const BasicTensor<T>& x, const std::vector<std::size_t>& rows);
/// One entry of the leading axis, with that axis dropped.
template <typename T> BasicTensor<T> row(const BasicTensor<T>& x, std::size_t index);

/// x W + b. A rank-1 x is treated as a single row and the result is rank 1.
template <typename T>
BasicTensor<T> affine(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

/// Mean over all entries of the fused sigmoid + binary cross-entropy,
/// max(z,0) - z*y + log(1 + exp(-|z|)). Targets receive no gradient.
template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& logits, const BasicTensor<T>& targets);

/// Reverse-mode pass from a scalar. Throws ContractError for non-scalars.
template <typename T> void backward(const BasicTensor<T>& loss);

} // namespace hieract
