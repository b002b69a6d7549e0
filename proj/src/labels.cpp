#include "hieract/labels.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "hieract/errors.hpp"

namespace hieract {

namespace {

constexpr std::string_view kShippedMapping =
#include "tsu_hierarchy_csv.inc"
    ;

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

LabelSpace::LabelSpace(std::vector<std::string> fine, std::vector<std::string> coarse,
                       std::vector<std::size_t> fine_to_coarse)
    : fine_(std::move(fine)), coarse_(std::move(coarse)), fine_to_coarse_(std::move(fine_to_coarse)) {
    if (fine_.empty() || coarse_.empty()) {
        throw ConfigError("label space needs at least one fine and one coarse class");
    }
    if (fine_to_coarse_.size() != fine_.size()) {
        throw ConfigError("fine -> coarse map has " + std::to_string(fine_to_coarse_.size()) + " entries for " +
                          std::to_string(fine_.size()) + " fine classes");
    }
    for (std::size_t i = 0; i < fine_.size(); ++i) {
        if (fine_[i].empty()) {
            throw ConfigError("empty fine label at index " + std::to_string(i));
        }
        if (!fine_lookup_.emplace(fine_[i], i).second) {
            throw ConfigError("duplicate fine label '" + fine_[i] + "'");
        }
    }
    for (std::size_t i = 0; i < coarse_.size(); ++i) {
        if (!coarse_lookup_.emplace(coarse_[i], i).second) {
            throw ConfigError("duplicate coarse label '" + coarse_[i] + "'");
        }
    }
    std::vector<bool> hit(coarse_.size(), false);
    for (std::size_t i = 0; i < fine_.size(); ++i) {
        if (fine_to_coarse_[i] >= coarse_.size()) {
            throw ConfigError("fine label '" + fine_[i] + "' maps to coarse index " +
                              std::to_string(fine_to_coarse_[i]) + " out of range");
        }
        hit[fine_to_coarse_[i]] = true;
    }
    for (std::size_t c = 0; c < coarse_.size(); ++c) {
        if (!hit[c]) {
            throw ConfigError("coarse label '" + coarse_[c] + "' has no fine label mapped to it");
        }
    }
}

const LabelSpace& LabelSpace::tsu() {
    static const LabelSpace shipped = parse_mapping_csv(kShippedMapping);
    return shipped;
}

bool LabelSpace::has_fine(std::string_view name) const { return fine_lookup_.find(name) != fine_lookup_.end(); }

std::size_t LabelSpace::fine_index(std::string_view name) const {
    auto it = fine_lookup_.find(name);
    if (it == fine_lookup_.end()) {
        throw MissingIdError("unknown fine label '" + std::string(name) + "'");
    }
    return it->second;
}

std::size_t LabelSpace::coarse_index(std::string_view name) const {
    auto it = coarse_lookup_.find(name);
    if (it == coarse_lookup_.end()) {
        throw MissingIdError("unknown coarse label '" + std::string(name) + "'");
    }
    return it->second;
}

std::vector<float> LabelSpace::coarse_targets(const std::vector<float>& y_fine) const {
    if (y_fine.size() != fine_.size()) {
        throw DimensionError("coarse_targets: " + std::to_string(y_fine.size()) + " fine targets for " +
                             std::to_string(fine_.size()) + " classes");
    }
    std::vector<float> y(coarse_.size(), 0.0f);
    for (std::size_t f = 0; f < fine_.size(); ++f) {
        if (y_fine[f] != 0.0f) {
            y[fine_to_coarse_[f]] = 1.0f;
        }
    }
    return y;
}

const std::vector<std::string>& tsu_coarse_names() {
    static const std::vector<std::string> names = {
        "beverage preparation", "cleaning", "cook", "drink", "prepare breakfast", "use household appliances",
        "general household activities"};
    return names;
}

LabelSpace parse_mapping_csv(std::string_view text, const std::vector<std::string>* vocabulary) {
    std::vector<std::string> fine;
    std::vector<std::string> coarse_of;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto row = trim(line);
        if (row.empty() || row.front() == '#') {
            continue;
        }
        auto comma = row.find(',');
        if (comma == std::string::npos || row.find(',', comma + 1) != std::string::npos) {
            throw ConfigError("mapping line " + std::to_string(line_no) + ": expected 'fine_label,coarse_label', got '" +
                              row + "'");
        }
        auto f = trim(std::string_view(row).substr(0, comma));
        auto c = trim(std::string_view(row).substr(comma + 1));
        if (f == "fine_label" && c == "coarse_label") {
            continue;
        }
        if (f.empty() || c.empty()) {
            throw ConfigError("mapping line " + std::to_string(line_no) + ": empty field");
        }
        if (std::find(fine.begin(), fine.end(), f) != fine.end()) {
            throw ConfigError("mapping line " + std::to_string(line_no) + ": fine label '" + f + "' mapped twice");
        }
        fine.push_back(std::move(f));
        coarse_of.push_back(std::move(c));
    }
    if (vocabulary != nullptr) {
        std::string missing;
        for (const auto& v : *vocabulary) {
            if (std::find(fine.begin(), fine.end(), v) == fine.end()) {
                missing += (missing.empty() ? "" : ", ") + v;
            }
        }
        if (!missing.empty()) {
            throw ConfigError("mapping is missing fine classes: " + missing);
        }
    }
    std::set<std::string> distinct(coarse_of.begin(), coarse_of.end());
    const auto& canonical = tsu_coarse_names();
    std::vector<std::string> coarse;
    if (distinct == std::set<std::string>(canonical.begin(), canonical.end())) {
        coarse = canonical;
    } else {
        for (const auto& c : coarse_of) {
            if (std::find(coarse.begin(), coarse.end(), c) == coarse.end()) {
                coarse.push_back(c);
            }
        }
    }
    std::vector<std::size_t> map;
    for (const auto& c : coarse_of) {
        map.push_back(static_cast<std::size_t>(std::find(coarse.begin(), coarse.end(), c) - coarse.begin()));
    }
    return LabelSpace(std::move(fine), std::move(coarse), std::move(map));
}

LabelSpace load_mapping_csv(const std::filesystem::path& path, const std::vector<std::string>* vocabulary) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open mapping file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_mapping_csv(buf.str(), vocabulary);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string format_mapping_csv(const LabelSpace& labels) {
    std::string out = "fine_label,coarse_label\n";
    for (std::size_t f = 0; f < labels.n_fine(); ++f) {
        out += labels.fine_name(f) + "," + labels.coarse_name(labels.coarse_of(f)) + "\n";
    }
    return out;
}

} // namespace hieract
