#include "hieract/context.hpp"

#include <cctype>
#include <cmath>

#include "hieract/errors.hpp"
#include "hieract/haf1.hpp"
#include "hieract/random.hpp"

namespace hieract {

namespace {

constexpr std::string_view kNullToken = "\x01<null>";

std::vector<std::string> recent(const PromptContext& ctx) {
    std::size_t n = std::min(ctx.n_requested, ctx.past_actions.size());
    return {ctx.past_actions.end() - static_cast<std::ptrdiff_t>(n), ctx.past_actions.end()};
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) {
            out += sep;
        }
        out += parts[i];
    }
    return out;
}

void add_token(std::vector<double>& acc, std::string_view token, std::uint64_t seed) {
    Rng rng(derive_seed(seed, token));
    std::vector<double> v(acc.size());
    double norm = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i] += v[i] / norm;
    }
}

} // namespace

std::vector<std::string> prompt_template_versions() { return {"v1", "v2"}; }

std::string build_prompt(const PromptContext& ctx, bool include_location, std::string_view template_version) {
    auto actions = recent(ctx);
    std::string out;
    if (template_version == "v1") {
        if (include_location) {
            out = "The person is in the " + ctx.location + ". ";
        }
        if (actions.empty()) {
            out += "No previous actions are known.";
        } else {
            out += "Previously, the person: " + join(actions, "; ") + ".";
        }
        return out;
    }
    if (template_version == "v2") {
        if (include_location) {
            out = "Location: " + ctx.location + ". ";
        }
        out += "Previous actions: " + (actions.empty() ? std::string("none") : join(actions, ", ")) + ".";
        return out;
    }
    throw ConfigError("unknown prompt template '" + std::string(template_version) + "' (known: v1, v2)");
}

std::string humanize_label(std::string_view label) {
    std::string out;
    for (char c : label) {
        if (c == '_') {
            out += ' ';
        } else if (c == '.') {
            out += ", ";
        } else {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        if (u < 128 && (std::isspace(u) || std::ispunct(u))) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else {
            current += static_cast<char>(u < 128 ? std::tolower(u) : u);
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

std::vector<float> toy_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) {
        throw ContractError("toy_embed: dim must be >= 1");
    }
    std::vector<double> acc(dim, 0.0);
    auto tokens = tokenize(text);
    if (tokens.empty()) {
        add_token(acc, kNullToken, seed);
    }
    for (const auto& t : tokens) {
        add_token(acc, t, seed);
    }
    double norm = 0.0;
    for (double x : acc) {
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        // Exact cancellation of token vectors; fall back to the null token.
        std::fill(acc.begin(), acc.end(), 0.0);
        add_token(acc, kNullToken, seed);
        norm = 1.0;
    }
    std::vector<float> out(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        out[i] = static_cast<float>(acc[i] / norm);
    }
    return out;
}

HashingTextEmbedder::HashingTextEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0) {
        throw ConfigError("text embedder dim must be positive");
    }
}

TextFeatureTable::TextFeatureTable(std::size_t dim, std::map<std::string, std::vector<float>> vectors)
    : dim_(dim), vectors_(std::move(vectors)) {
    for (const auto& [id, v] : vectors_) {
        if (v.size() != dim_) {
            throw DimensionError("text feature '" + id + "' has dim " + std::to_string(v.size()) + ", expected " +
                                 std::to_string(dim_));
        }
    }
}

const std::vector<float>& TextFeatureTable::get(const std::string& id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) {
        throw MissingIdError("text features: no vector for id '" + id + "'");
    }
    return it->second;
}

TextFeatureTable load_text_features(const std::filesystem::path& path) {
    auto file = read_feature_file(path);
    std::map<std::string, std::vector<float>> vectors;
    std::size_t dim = 0;
    for (std::size_t i = 0; i < file.records.size(); ++i) {
        const auto& rec = file.records[i];
        if (rec.extents.size() != 1) {
            throw FormatError(path.string() + ": text feature '" + file.ids[i] + "' has rank " +
                              std::to_string(rec.extents.size()) + ", expected 1");
        }
        if (i == 0) {
            dim = rec.extents[0];
        } else if (rec.extents[0] != dim) {
            throw FormatError(path.string() + ": text feature '" + file.ids[i] + "' has dim " +
                              std::to_string(rec.extents[0]) + ", expected " + std::to_string(dim));
        }
        vectors.emplace(file.ids[i], rec.values);
    }
    return TextFeatureTable(dim, std::move(vectors));
}

void save_text_features(const std::filesystem::path& path, const TextFeatureTable& table) {
    FeatureFile file;
    for (const auto& [id, v] : table.vectors()) {
        file.ids.push_back(id);
        file.records.push_back(Haf1Record{{static_cast<std::uint32_t>(v.size())}, v});
    }
    write_feature_file(path, file);
}

} // namespace hieract
