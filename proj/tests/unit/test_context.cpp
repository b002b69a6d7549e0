#include <catch2/catch.hpp>

#include <cmath>
#include <set>

#include "hieract/context.hpp"
#include "hieract/errors.hpp"
#include "support.hpp"

using namespace hieract;

namespace {

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += double(a[i]) * b[i];
        na += double(a[i]) * a[i];
        nb += double(b[i]) * b[i];
    }
    return dot / std::sqrt(na * nb);
}

} // namespace

TEST_CASE("v1 prompt template renders location and history", "[context]") {
    PromptContext ctx{"kitchen", {"make coffee"}, 5};
    CHECK(build_prompt(ctx, true) == "The person is in the kitchen. Previously, the person: make coffee.");
    PromptContext empty{"kitchen", {}, 5};
    CHECK(build_prompt(empty, false) == "No previous actions are known.");
    CHECK(build_prompt(empty, true) == "The person is in the kitchen. No previous actions are known.");
}

TEST_CASE("history clauses appear oldest first joined by semicolons", "[context]") {
    std::vector<std::string> actions{"a one", "b two", "c three", "d four", "e five", "f six"};
    PromptContext ctx{"garden", actions, 5};
    std::string expected = "Previously, the person: ";
    for (std::size_t i = 1; i < actions.size(); ++i) expected += actions[i] + (i + 1 < actions.size() ? "; " : ".");
    CHECK(build_prompt(ctx, false) == expected);
    ctx.n_requested = 1;
    CHECK(build_prompt(ctx, false) == "Previously, the person: f six.");
}

TEST_CASE("v2 template and unknown template", "[context]") {
    PromptContext ctx{"kitchen", {"cook", "eat"}, 5};
    CHECK(build_prompt(ctx, true, "v2") == "Location: kitchen. Previous actions: cook, eat.");
    ctx.past_actions.clear();
    CHECK(build_prompt(ctx, false, "v2") == "Previous actions: none.");
    CHECK_THROWS_AS(build_prompt(ctx, false, "v9"), ConfigError);
}

TEST_CASE("prompts are distinct for distinct contexts over a vocabulary", "[context]") {
    std::vector<std::string> vocab{"make coffee", "pour water", "eat"};
    std::vector<std::string> locations{"kitchen", "dining room"};
    std::set<std::string> seen;
    std::size_t count = 0;
    for (const auto& loc : locations) {
        for (std::size_t n = 0; n <= 2; ++n) {
            // All sequences of length n over the vocabulary.
            std::size_t total = 1;
            for (std::size_t i = 0; i < n; ++i) total *= vocab.size();
            for (std::size_t code = 0; code < total; ++code) {
                std::vector<std::string> seq;
                for (std::size_t i = 0, c = code; i < n; ++i, c /= vocab.size()) seq.push_back(vocab[c % vocab.size()]);
                seen.insert(build_prompt({loc, seq, 5}, true));
                ++count;
            }
        }
    }
    CHECK(seen.size() == count);
}

TEST_CASE("label humanizing and tokenizing", "[context]") {
    CHECK(humanize_label("Make_coffee.Pour_water") == "make coffee, pour water");
    CHECK(tokenize("The person: make coffee; Eat.") ==
          std::vector<std::string>{"the", "person", "make", "coffee", "eat"});
    CHECK(tokenize("  ").empty());
}

TEST_CASE("toy embedding is deterministic, unit norm and overlap sensitive", "[context]") {
    auto a = toy_embed("make coffee in kitchen", 64, 7);
    CHECK(a == toy_embed("make coffee in kitchen", 64, 7));
    CHECK(a != toy_embed("make coffee in kitchen", 64, 8));
    double norm = 0;
    for (float v : a) norm += double(v) * v;
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-6);
    auto b = toy_embed("make tea in kitchen", 64, 7);
    auto c = toy_embed("watch tv in livingroom", 64, 7);
    CHECK(cosine(a, b) > cosine(a, c));
    auto e = toy_embed("", 16, 7);
    CHECK(e == toy_embed("...", 16, 7));
    CHECK_THROWS_AS(toy_embed("x", 0, 7), ContractError);
    HashingTextEmbedder emb(16, 7);
    CHECK(emb.dim() == 16);
    CHECK(emb.embed("abc") == toy_embed("abc", 16, 7));
}

TEST_CASE("text feature files round-trip and report missing ids", "[context][formats]") {
    testing::TempDir dir("text");
    std::map<std::string, std::vector<float>> v{{"s1", {1, 2, 3}}, {"s2", {0.5f, -1, 1e-30f}}, {"s3", {4, 5, 6}}};
    TextFeatureTable table(3, v);
    save_text_features(dir / "text.haf1", table);
    auto back = load_text_features(dir / "text.haf1");
    CHECK(back.vectors() == table.vectors());
    CHECK(back.dim() == 3);
    CHECK_THROWS_AS(back.get("s4"), MissingIdError);
    CHECK_THROWS_AS(TextFeatureTable(4, v), DimensionError);
}
