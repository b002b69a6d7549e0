#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hieract {

/// Location plus the most recent completed actions, oldest first.
struct PromptContext {
    std::string location;
    std::vector<std::string> past_actions;
    std::size_t n_requested = 5;
};

/// Known prompt template versions. "v1" is the default.
std::vector<std::string> prompt_template_versions();

/// Render a context as text.
///
/// v1: "The person is in the {location}. Previously, the person: a; b; c."
///     and "No previous actions are known." for an empty history. The
///     location sentence is omitted when include_location is false.
/// v2: "Location: {location}. Previous actions: a, b, c." / "... none."
///
/// Only the n_requested most recent actions are rendered.
std::string build_prompt(const PromptContext& ctx, bool include_location, std::string_view template_version = "v1");

/// "Make_coffee.Pour_water" -> "make coffee, pour water".
std::string humanize_label(std::string_view label);

/// Lowercased tokens split on whitespace and ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);

/// Text -> fixed-dimension vector. Implementations must be deterministic.
class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<float> embed(std::string_view text) const = 0;
};

/// Bag-of-tokens embedding: every token hashes (with the seed) to a fixed
/// pseudo-random unit vector; the result is the L2-normalized sum. Text
/// without tokens embeds as a reserved null token.
std::vector<float> toy_embed(std::string_view text, std::size_t dim, std::uint64_t seed);

class HashingTextEmbedder final : public TextEmbedder {
public:
    HashingTextEmbedder(std::size_t dim, std::uint64_t seed);
    std::size_t dim() const override { return dim_; }
    std::vector<float> embed(std::string_view text) const override { return toy_embed(text, dim_, seed_); }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Precomputed text features keyed by sample id (HAF1 + id sidecar).
class TextFeatureTable {
public:
    TextFeatureTable() = default;
    TextFeatureTable(std::size_t dim, std::map<std::string, std::vector<float>> vectors);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    bool contains(const std::string& id) const { return vectors_.count(id) != 0; }
    /// Throws MissingIdError naming the id.
    const std::vector<float>& get(const std::string& id) const;
    const std::map<std::string, std::vector<float>>& vectors() const { return vectors_; }

private:
    std::size_t dim_ = 0;
    std::map<std::string, std::vector<float>> vectors_;
};

/// Every record must be rank 1 with one shared dimension.
TextFeatureTable load_text_features(const std::filesystem::path& path);
void save_text_features(const std::filesystem::path& path, const TextFeatureTable& table);

} // namespace hieract
