#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hieract/experiment.hpp"

namespace hieract {

struct AblationAxis {
    std::string name; // canonical axis name
    std::vector<nlohmann::json> values;
};

/// {"axis": [values...], ...} or {"axes": {...}}. Aliases resolve to
/// canonical names and axes keep document order. Unknown axes and empty value
/// lists are ConfigErrors.
std::vector<AblationAxis> parse_ablation_grid(const nlohmann::ordered_json& doc);

/// Canonical axis names.
std::vector<std::string> ablation_axis_names();

/// Sets one axis on a config. Throws ConfigError for bad values.
void apply_ablation_value(ExperimentConfig& cfg, const std::string& axis, const nlohmann::json& value);

struct AblationCell {
    std::string label; // "axis=value, ..."
    ExperimentConfig config;
    std::string digest;
    MetricsReport report;
};

/// Cartesian product of the axes, every cell trained with the base seed on a
/// shared dataset. Rows come back sorted by fine top-1, best first (stable).
std::vector<AblationCell> run_ablation(const ExperimentConfig& base, const std::vector<AblationAxis>& axes,
                                       const std::function<void(const AblationCell&)>& on_cell = {});

/// Markdown table: cell, fine/coarse top-1/top-5, digest.
std::string format_ablation_table(const std::vector<AblationCell>& cells);

} // namespace hieract
