#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "hieract/errors.hpp"
#include "hieract/random.hpp"
#include "hieract/tensor.hpp"

namespace hieract {

template <typename T>
struct Parameter {
    std::string name;
    BasicTensor<T> tensor;
    bool decay_exempt = false; // biases and normalization gains
};

/// Owns every trainable tensor of a model, in registration order.
template <typename T>
class ParameterStore {
public:
    /// Register a new parameter. Throws ConfigError on a duplicate name.
    BasicTensor<T> add(const std::string& name, Shape shape, std::vector<T> values, bool decay_exempt);

    std::vector<Parameter<T>>& items() { return items_; }
    const std::vector<Parameter<T>>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    std::size_t total_elements() const;

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const Parameter<T>& get(const std::string& name) const;
    Parameter<T>& get(const std::string& name);

    /// Allocate and zero every gradient buffer.
    void zero_grad();

    /// Copy values by name from another store (any scalar type). Names and
    /// shapes must match one to one.
    template <typename U>
    void copy_values_from(const ParameterStore<U>& other);

    /// Flat snapshot of all values, in registration order.
    std::vector<T> snapshot() const;
    void restore(const std::vector<T>& flat);

private:
    std::vector<Parameter<T>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

// ---- initializers --------------------------------------------------------

template <typename T>
std::vector<T> init_normal(Rng& rng, std::size_t n, double stddev) {
    std::vector<T> out(n);
    for (auto& v : out) {
        v = static_cast<T>(rng.normal() * stddev);
    }
    return out;
}

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
std::vector<T> init_fan_in(Rng& rng, std::size_t n, std::size_t fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<T> out(n);
    for (auto& v : out) {
        v = static_cast<T>(rng.uniform(-bound, bound));
    }
    return out;
}

// ---- layers --------------------------------------------------------------

template <typename T>
struct Linear {
    BasicTensor<T> weight; // in x out
    BasicTensor<T> bias;   // out

    Linear() = default;
    Linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);

    std::size_t in_features() const { return weight.shape()[0]; }
    std::size_t out_features() const { return weight.shape()[1]; }
    BasicTensor<T> operator()(const BasicTensor<T>& x) const { return affine(x, weight, bias); }
};

template <typename T>
struct LayerNorm {
    BasicTensor<T> gain;
    BasicTensor<T> bias;
    T eps = T(1e-5);

    LayerNorm() = default;
    LayerNorm(ParameterStore<T>& store, const std::string& name, std::size_t width);

    BasicTensor<T> operator()(const BasicTensor<T>& x) const { return layer_norm(x, gain, bias, eps); }
};


template <typename T>
template <typename U>
void ParameterStore<T>::copy_values_from(const ParameterStore<U>& other) {
    if (other.size() != size()) {
        throw ConfigError("parameter stores differ in size: " + std::to_string(other.size()) + " vs " +
                          std::to_string(size()));
    }
    for (const auto& src : other.items()) {
        auto& dst = get(src.name);
        if (dst.tensor.shape() != src.tensor.shape()) {
            throw DimensionError("parameter " + src.name + " has shape " + shape_str(src.tensor.shape()) +
                                 " but expected " + shape_str(dst.tensor.shape()));
        }
        auto out = dst.tensor.mutable_data();
        auto in = src.tensor.data();
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = static_cast<T>(in[i]);
        }
    }
}

} // namespace hieract
