#pragma once

#include <cstddef>
#include <vector>

#include "hieract/parameter.hpp"

namespace hieract {

struct AdamWConfig {
    double weight_decay = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with decoupled weight decay: p -= lr * wd * p (decay-exempt
/// parameters skipped), then the bias-corrected Adam update.
template <typename T>
class AdamW {
public:
    AdamW(ParameterStore<T>& store, AdamWConfig cfg = {});

    /// Throws ContractError if any parameter has no gradient buffer.
    void step(double lr);
    std::size_t steps() const { return steps_; }

private:
    ParameterStore<T>* store_;
    AdamWConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t steps_ = 0;
};

/// base_lr * (epoch + 1) / warmup_epochs during warmup, base_lr after.
double lr_schedule(std::size_t epoch, double base_lr, std::size_t warmup_epochs);

/// Global L2 norm over every gradient.
template <typename T>
double gradient_norm(const ParameterStore<T>& store);

/// Rescales all gradients to max_norm when the global norm exceeds it.
/// Returns the norm before clipping.
template <typename T>
double clip_gradients(ParameterStore<T>& store, double max_norm);

} // namespace hieract
