#include "hieract/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "hieract/errors.hpp"

namespace hieract {

namespace {

const std::map<std::string, std::string>& axis_aliases() {
    static const std::map<std::string, std::string> aliases = {
        {"pos_encoding", "pos_encoding"},
        {"positional_encoding", "pos_encoding"},
        {"pooling", "pooling"},
        {"n_layers", "n_layers"},
        {"encoder_layers", "n_layers"},
        {"n_heads", "n_heads"},
        {"encoder_heads", "n_heads"},
        {"embed_dim", "embed_dim"},
        {"embed_size", "embed_dim"},
        {"visual_fusion", "visual_fusion"},
        {"fuse_layers", "fuse_layers"},
        {"fusion_layers", "fuse_layers"},
        {"fuse_heads", "fuse_heads"},
        {"fusion_heads", "fuse_heads"},
        {"fuse_dim", "fuse_dim"},
        {"n_blocks", "n_blocks"},
        {"n_past", "n_past"},
        {"include_location", "include_location"},
        {"hierarchy_strategy", "hierarchy_strategy"},
        {"strategy", "hierarchy_strategy"},
        {"fusion_strategy", "fusion_strategy"},
        {"modalities", "modalities"},
        {"modality_set", "modalities"},
        {"joint_loss", "joint_loss"},
    };
    return aliases;
}

template <typename V>
V as(const nlohmann::json& value, const std::string& axis) {
    try {
        return value.get<V>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("ablation axis '" + axis + "': value " + value.dump() + " has the wrong type");
    }
}

std::string value_text(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

} // namespace

std::vector<std::string> ablation_axis_names() {
    std::vector<std::string> names;
    for (const auto& [alias, name] : axis_aliases()) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            names.push_back(name);
        }
    }
    return names;
}

std::vector<AblationAxis> parse_ablation_grid(const nlohmann::ordered_json& doc) {
    const nlohmann::ordered_json& axes = doc.contains("axes") ? doc.at("axes") : doc;
    if (!axes.is_object() || axes.empty()) {
        throw ConfigError("ablation grid is empty; give at least one axis, e.g. {\"pos_encoding\": [\"none\", "
                          "\"fixed\", \"learnable\"]}");
    }
    std::vector<AblationAxis> out;
    for (auto it = axes.begin(); it != axes.end(); ++it) {
        auto found = axis_aliases().find(it.key());
        if (found == axis_aliases().end()) {
            std::string known;
            for (const auto& n : ablation_axis_names()) {
                known += (known.empty() ? "" : ", ") + n;
            }
            throw ConfigError("unknown ablation axis '" + it.key() + "' (known: " + known + ")");
        }
        if (!it.value().is_array() || it.value().empty()) {
            throw ConfigError("ablation axis '" + it.key() + "' needs a nonempty list of values");
        }
        for (const auto& a : out) {
            if (a.name == found->second) {
                throw ConfigError("ablation axis '" + found->second + "' given twice");
            }
        }
        AblationAxis axis{found->second, {}};
        for (const auto& v : it.value()) {
            axis.values.push_back(nlohmann::json::parse(v.dump()));
        }
        out.push_back(std::move(axis));
    }
    return out;
}

void apply_ablation_value(ExperimentConfig& cfg, const std::string& axis, const nlohmann::json& value) {
    auto& m = cfg.model;
    auto str = [&] { return as<std::string>(value, axis); };
    auto num = [&] { return as<std::size_t>(value, axis); };
    try {
        if (axis == "pos_encoding") {
            m.video.encoder.pos_encoding = parse_pos_encoding(str());
        } else if (axis == "pooling") {
            m.video.encoder.pooling = parse_pooling(str());
        } else if (axis == "n_layers") {
            m.video.encoder.n_layers = num();
        } else if (axis == "n_heads") {
            m.video.encoder.n_heads = num();
        } else if (axis == "embed_dim") {
            m.video.encoder.embed_dim = num();
        } else if (axis == "visual_fusion") {
            m.video.visual_fusion = parse_visual_fusion(str());
        } else if (axis == "fuse_layers") {
            m.fusion.n_layers = num();
        } else if (axis == "fuse_heads") {
            m.fusion.n_heads = num();
        } else if (axis == "fuse_dim") {
            m.fusion.fuse_dim = num();
        } else if (axis == "n_blocks") {
            m.video.n_blocks = num();
        } else if (axis == "n_past") {
            cfg.context.n_past = num();
        } else if (axis == "include_location") {
            cfg.context.include_location = as<bool>(value, axis);
        } else if (axis == "hierarchy_strategy") {
            m.strategy = parse_hierarchy_strategy(str());
        } else if (axis == "fusion_strategy") {
            m.fusion.strategy = parse_fusion_strategy(str());
        } else if (axis == "modalities") {
            m.modalities = ModalitySet::parse(str());
        } else if (axis == "joint_loss") {
            m.joint_loss = as<bool>(value, axis);
        } else {
            throw ConfigError("unknown ablation axis '" + axis + "'");
        }
    } catch (const ConfigError& e) {
        throw ConfigError("ablation " + axis + "=" + value_text(value) + ": " + e.what());
    }
}

std::vector<AblationCell> run_ablation(const ExperimentConfig& base, const std::vector<AblationAxis>& axes,
                                       const std::function<void(const AblationCell&)>& on_cell) {
    if (axes.empty()) {
        throw ConfigError("ablation grid is empty");
    }
    std::vector<AblationCell> cells;
    std::vector<std::size_t> index(axes.size(), 0);
    for (bool done = false; !done;) {
        AblationCell cell;
        cell.config = base;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& v = axes[a].values[index[a]];
            apply_ablation_value(cell.config, axes[a].name, v);
            cell.label += (a ? ", " : "") + axes[a].name + "=" + value_text(v);
        }
        try {
            cell.config.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("ablation cell [" + cell.label + "] is invalid: " + e.what());
        }
        cells.push_back(std::move(cell));
        // Odometer step; the last axis varies fastest.
        done = true;
        for (std::size_t a = axes.size(); a-- > 0;) {
            if (++index[a] < axes[a].values.size()) {
                done = false;
                break;
            }
            index[a] = 0;
        }
    }

    auto dataset = load_experiment_dataset(base);
    for (auto& cell : cells) {
        Experiment exp(cell.config, dataset);
        auto model = exp.make_model();
        cell.report = exp.run(model);
        cell.digest = exp.digest();
        if (on_cell) {
            on_cell(cell);
        }
    }
    std::stable_sort(cells.begin(), cells.end(), [](const AblationCell& a, const AblationCell& b) {
        return a.report.fine_top(1) > b.report.fine_top(1);
    });
    return cells;
}

std::string format_ablation_table(const std::vector<AblationCell>& cells) {
    auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); };
    std::string out = "| cell | fine top-1 | fine top-5 | coarse top-1 | coarse top-5 | digest |\n"
                      "|---|---|---|---|---|---|\n";
    for (const auto& c : cells) {
        const auto& e = c.report.eval;
        out += "| " + c.label + " | " + fmt(e.at(1).fine) + " | " + fmt(e.at(5).fine) + " | " + opt(e.at(1).coarse) +
               " | " + opt(e.at(5).coarse) + " | " + c.digest + " |\n";
    }
    return out;
}

} // namespace hieract
