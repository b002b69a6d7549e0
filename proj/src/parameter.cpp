#include "hieract/parameter.hpp"

#include "hieract/errors.hpp"

namespace hieract {

template <typename T>
BasicTensor<T> ParameterStore<T>::add(const std::string& name, Shape shape, std::vector<T> values, bool decay_exempt) {
    if (index_.count(name)) {
        throw ConfigError("duplicate parameter name: " + name);
    }
    auto tensor = BasicTensor<T>::from_vector(std::move(values), std::move(shape), true);
    index_.emplace(name, items_.size());
    items_.push_back(Parameter<T>{name, tensor, decay_exempt});
    return tensor;
}

template <typename T>
std::size_t ParameterStore<T>::total_elements() const {
    std::size_t n = 0;
    for (const auto& p : items_) {
        n += p.tensor.numel();
    }
    return n;
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw MissingIdError("unknown parameter: " + name);
    }
    return items_[it->second];
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw MissingIdError("unknown parameter: " + name);
    }
    return items_[it->second];
}

template <typename T>
void ParameterStore<T>::zero_grad() {
    for (auto& p : items_) {
        p.tensor.zero_grad();
    }
}

template <typename T>
std::vector<T> ParameterStore<T>::snapshot() const {
    std::vector<T> flat;
    flat.reserve(total_elements());
    for (const auto& p : items_) {
        flat.insert(flat.end(), p.tensor.data().begin(), p.tensor.data().end());
    }
    return flat;
}

template <typename T>
void ParameterStore<T>::restore(const std::vector<T>& flat) {
    if (flat.size() != total_elements()) {
        throw DimensionError("restore: snapshot holds " + std::to_string(flat.size()) + " values, store needs " +
                             std::to_string(total_elements()));
    }
    std::size_t offset = 0;
    for (auto& p : items_) {
        auto out = p.tensor.mutable_data();
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                  flat.begin() + static_cast<std::ptrdiff_t>(offset + out.size()), out.begin());
        offset += out.size();
    }
}

template <typename T>
Linear<T>::Linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    weight = store.add(name + ".weight", {in, out}, init_fan_in<T>(rng, in * out, in), false);
    bias = store.add(name + ".bias", {out}, std::vector<T>(out, T(0)), true);
}

template <typename T>
LayerNorm<T>::LayerNorm(ParameterStore<T>& store, const std::string& name, std::size_t width) {
    gain = store.add(name + ".gain", {width}, std::vector<T>(width, T(1)), true);
    bias = store.add(name + ".bias", {width}, std::vector<T>(width, T(0)), true);
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;

} // namespace hieract
