#include "hieract/optim.hpp"

#include <cmath>

#include "hieract/errors.hpp"

namespace hieract {

template <typename T>
AdamW<T>::AdamW(ParameterStore<T>& store, AdamWConfig cfg) : store_(&store), cfg_(cfg) {
    for (const auto& p : store.items()) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

template <typename T>
void AdamW<T>::step(double lr) {
    auto& items = store_->items();
    if (items.size() != m_.size()) {
        throw ContractError("AdamW: parameter store changed size after construction");
    }
    for (const auto& p : items) {
        if (!p.tensor.has_grad()) {
            throw ContractError("AdamW: parameter '" + p.name + "' has no gradient");
        }
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& p = items[i];
        auto w = p.tensor.mutable_data();
        auto g = p.tensor.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        const double decay = p.decay_exempt ? 1.0 : 1.0 - lr * cfg_.weight_decay;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g[j];
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
            const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
            w[j] = static_cast<T>(static_cast<double>(w[j]) * decay - lr * update);
        }
    }
}

double lr_schedule(std::size_t epoch, double base_lr, std::size_t warmup_epochs) {
    if (epoch < warmup_epochs) {
        return base_lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
    }
    return base_lr;
}

template <typename T>
double gradient_norm(const ParameterStore<T>& store) {
    double sq = 0.0;
    for (const auto& p : store.items()) {
        for (T g : p.tensor.grad()) {
            sq += static_cast<double>(g) * static_cast<double>(g);
        }
    }
    return std::sqrt(sq);
}

template <typename T>
double clip_gradients(ParameterStore<T>& store, double max_norm) {
    const double norm = gradient_norm(store);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& p : store.items()) {
            for (auto& g : p.tensor.mutable_grad()) {
                g = static_cast<T>(g * s);
            }
        }
    }
    return norm;
}

template class AdamW<float>;
template class AdamW<double>;
template double gradient_norm(const ParameterStore<float>&);
template double gradient_norm(const ParameterStore<double>&);
template double clip_gradients(ParameterStore<float>&, double);
template double clip_gradients(ParameterStore<double>&, double);

} // namespace hieract
