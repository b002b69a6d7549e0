#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hieract {

/// Fine vocabulary, coarse vocabulary and the total, surjective fine -> coarse map.
class LabelSpace {
public:
    LabelSpace() = default;
    /// Throws ConfigError unless every fine label maps to a known coarse
    /// label, names are unique and every coarse label is hit.
    LabelSpace(std::vector<std::string> fine, std::vector<std::string> coarse, std::vector<std::size_t> fine_to_coarse);

    /// The shipped 51 -> 7 household mapping.
    static const LabelSpace& tsu();

    std::size_t n_fine() const { return fine_.size(); }
    std::size_t n_coarse() const { return coarse_.size(); }
    const std::vector<std::string>& fine() const { return fine_; }
    const std::vector<std::string>& coarse() const { return coarse_; }
    const std::string& fine_name(std::size_t i) const { return fine_.at(i); }
    const std::string& coarse_name(std::size_t i) const { return coarse_.at(i); }
    std::size_t coarse_of(std::size_t fine_index) const { return fine_to_coarse_.at(fine_index); }
    const std::vector<std::size_t>& fine_to_coarse() const { return fine_to_coarse_; }

    bool has_fine(std::string_view name) const;
    /// Throws MissingIdError.
    std::size_t fine_index(std::string_view name) const;
    std::size_t coarse_index(std::string_view name) const;

    /// OR-image of a fine target vector under the map.
    std::vector<float> coarse_targets(const std::vector<float>& y_fine) const;

    friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

private:
    std::vector<std::string> fine_;
    std::vector<std::string> coarse_;
    std::vector<std::size_t> fine_to_coarse_;
    std::map<std::string, std::size_t, std::less<>> fine_lookup_;
    std::map<std::string, std::size_t, std::less<>> coarse_lookup_;
};

/// Coarse names in canonical order.
const std::vector<std::string>& tsu_coarse_names();

/// Parse "fine_label,coarse_label" rows (optional header). Fine order is row
/// order. Coarse order is canonical when the names are exactly the seven
/// household categories, first appearance otherwise. When `vocabulary` is
/// given, every listed fine label must be mapped: missing labels are a
/// ConfigError listing them all. Malformed rows report their line number.
LabelSpace parse_mapping_csv(std::string_view text, const std::vector<std::string>* vocabulary = nullptr);
LabelSpace load_mapping_csv(const std::filesystem::path& path, const std::vector<std::string>* vocabulary = nullptr);
std::string format_mapping_csv(const LabelSpace& labels);

} // namespace hieract
