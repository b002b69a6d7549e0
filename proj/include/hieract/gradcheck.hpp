#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hieract/model.hpp"
#include "hieract/tensor.hpp"

namespace hieract {

struct GradcheckOptions {
    double eps = 1e-3;       // central-difference step
    double tolerance = 1e-3; // max relative error
    double floor = 1e-3;     // denominator floor for near-zero gradients
    std::uint64_t seed = 0;
};

struct GradcheckRow {
    std::string name;
    std::size_t n_checked = 0;
    std::size_t n_parameters = 0; // model rows only
    double max_rel_error = 0.0;
    double tolerance = 0.0;

    bool passed() const { return n_checked > 0 && max_rel_error <= tolerance; }
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

using GradFn = std::function<Tensor64(const std::vector<Tensor64>&)>;

/// Compares reverse-mode gradients of sum(f(inputs) * R), R a fixed random
/// weighting, against central differences for every input element.
GradcheckRow check_function(const std::string& name, const GradFn& f, std::vector<Tensor64> inputs,
                            const GradcheckOptions& options);

/// One row per differentiable operation (plus attention, encoder and fusion
/// composites).
std::vector<GradcheckRow> gradcheck_operations(const GradcheckOptions& options);

/// Joint loss of a double-precision model against central differences over
/// every parameter element.
GradcheckRow gradcheck_model(const ModelConfig& cfg, const std::string& name, const GradcheckOptions& options);

/// Tiny configuration for exhaustive model checks.
ModelConfig gradcheck_reference_config(HierarchyStrategy strategy = HierarchyStrategy::contextual_data);

/// Operation rows followed by one model row per hierarchy strategy and a
/// visual-only early-fusion variant.
std::vector<GradcheckRow> gradcheck_suite(const GradcheckOptions& options);

} // namespace hieract
