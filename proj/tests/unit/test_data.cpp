#include <catch2/catch.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "hieract/data.hpp"
#include "hieract/errors.hpp"
#include "hieract/labels.hpp"
#include "support.hpp"

using namespace hieract;

namespace {

const std::filesystem::path kFixtures = HIERACT_FIXTURE_DIR;

LabelSpace abc_labels() { return LabelSpace({"A", "B", "C", "D"}, {"x", "y"}, {0, 0, 1, 1}); }

AnnotatedVideo video(std::string id, std::string subject, std::vector<Event> events) {
    return AnnotatedVideo{std::move(id), std::move(subject), "kitchen", 25.0, std::move(events)};
}

// Brute-force OR-image oracle over the mapping.
std::vector<float> or_image(const std::vector<float>& yf, const LabelSpace& l) {
    std::vector<float> yc(l.n_coarse(), 0.0f);
    for (std::size_t c = 0; c < l.n_coarse(); ++c)
        for (std::size_t f = 0; f < l.n_fine(); ++f)
            if (l.coarse_of(f) == c && yf[f] != 0.0f) yc[c] = 1.0f;
    return yc;
}

} // namespace

TEST_CASE("shipped hierarchy has 51 fine labels in 7 groups", "[labels]") {
    const auto& l = LabelSpace::tsu();
    CHECK(l.n_fine() == 51);
    CHECK(l.n_coarse() == 7);
    CHECK(l.coarse() == tsu_coarse_names());
    std::vector<std::size_t> sizes(7, 0);
    for (std::size_t f = 0; f < 51; ++f) ++sizes[l.coarse_of(f)];
    CHECK(std::all_of(sizes.begin(), sizes.end(), [](std::size_t n) { return n > 0; }));
    CHECK(l.coarse_name(l.coarse_of(l.fine_index("Make_coffee.Pour_water"))) == "beverage preparation");
    CHECK_THROWS_AS(l.fine_index("Juggle"), MissingIdError);
}

TEST_CASE("label space construction validates the mapping", "[labels][errors]") {
    CHECK_THROWS_AS(LabelSpace({"A", "A"}, {"x"}, {0, 0}), ConfigError);
    CHECK_THROWS_AS(LabelSpace({"A", "B"}, {"x", "y"}, {0, 0}), ConfigError); // y unused
    CHECK_THROWS_AS(LabelSpace({"A", "B"}, {"x"}, {0, 1}), ConfigError);
    CHECK_THROWS_AS(LabelSpace({"A"}, {"x"}, {0, 0}), ConfigError);
    auto l = abc_labels();
    CHECK(l.coarse_targets({0, 1, 0, 0}) == std::vector<float>{1, 0});
    CHECK(l.coarse_targets({1, 0, 0, 1}) == std::vector<float>{1, 1});
    CHECK_THROWS_AS(l.coarse_targets({1, 0}), DimensionError);
}

TEST_CASE("mapping csv parsing and formatting", "[labels]") {
    auto l = parse_mapping_csv("fine_label,coarse_label\nA,x\nB,y\nC,x\n");
    CHECK(l.fine() == std::vector<std::string>{"A", "B", "C"});
    CHECK(l.coarse() == std::vector<std::string>{"x", "y"});
    CHECK(parse_mapping_csv(format_mapping_csv(l)) == l);
    CHECK(parse_mapping_csv("A,x\r\nB,y\r\n").n_fine() == 2);

    auto shipped = load_mapping_csv(std::filesystem::path(HIERACT_FIXTURE_DIR) / ".." / ".." / "data" / "tsu_hierarchy.csv");
    CHECK(shipped == LabelSpace::tsu());
}

TEST_CASE("mapping that misses a vocabulary class names it", "[labels][errors]") {
    std::vector<std::string> vocab = LabelSpace::tsu().fine();
    try {
        load_mapping_csv(kFixtures / "mapping_missing_walk.csv", &vocab);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK_THAT(e.what(), Catch::Contains("Walk"));
    }
    try {
        load_mapping_csv(kFixtures / "mapping_bad_row.csv");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK_THAT(e.what(), Catch::Contains("line 3"));
    }
    CHECK_THROWS_AS(parse_mapping_csv("A,x\nA,y\n"), ConfigError);
    CHECK_THROWS_AS(load_mapping_csv(kFixtures / "nope.csv"), ConfigError);
}

TEST_CASE("inclusive span overlap", "[data]") {
    CHECK(spans_overlap({"A", 0, 10}, {"B", 10, 20}));
    CHECK_FALSE(spans_overlap({"A", 0, 9}, {"B", 10, 20}));
    CHECK(spans_overlap({"A", 0, 100}, {"B", 50, 60}));
}

TEST_CASE("prior events end before the segment and come oldest first", "[data]") {
    std::vector<Event> ev{{"A", 0, 10}, {"B", 20, 30}, {"C", 40, 50}, {"D", 45, 90}, {"A", 100, 120}};
    CHECK(prior_event_indices(ev, 100, 5) == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(prior_event_indices(ev, 100, 2) == std::vector<std::size_t>{2, 3});
    CHECK(prior_event_indices(ev, 50, 5) == std::vector<std::size_t>{0, 1});
    CHECK(prior_event_indices(ev, 0, 5).empty());
}

TEST_CASE("single-event video gives a one-hot sample", "[data]") {
    auto l = abc_labels();
    auto s = build_samples({video("V1", "S1", {{"C", 5, 50}})}, l, 5);
    REQUIRE(s.size() == 1);
    CHECK(s[0].y_fine == std::vector<float>{0, 0, 1, 0});
    CHECK(s[0].y_coarse == std::vector<float>{0, 1});
    CHECK(s[0].prior_actions.empty());
    CHECK(s[0].sample_id == "V1:0000");
}

TEST_CASE("overlapping composite events share labels", "[data]") {
    auto l = abc_labels();
    auto s = build_samples({video("V1", "S1", {{"B", 50, 300}, {"A", 0, 100}})}, l, 5);
    REQUIRE(s.size() == 2);
    CHECK(s[0].defining_label == 0);
    CHECK(s[0].start == 0);
    CHECK(s[0].y_fine == std::vector<float>{1, 1, 0, 0});
    CHECK(s[1].defining_label == 1);
    CHECK(s[1].y_fine == std::vector<float>{1, 1, 0, 0});
    CHECK(s[1].prior_actions.empty());
    for (const auto& x : s) {
        CHECK(x.y_coarse == or_image(x.y_fine, l));
        CHECK(hierarchy_consistent(x, l));
    }
}

TEST_CASE("sequential events list earlier events as priors", "[data]") {
    auto l = abc_labels();
    auto s = build_samples({video("V1", "S1", {{"A", 0, 10}, {"C", 20, 30}, {"D", 40, 50}})}, l, 5);
    REQUIRE(s.size() == 3);
    CHECK(s[2].prior_actions == std::vector<std::size_t>{0, 2});
    auto s1 = build_samples({video("V1", "S1", {{"A", 0, 10}, {"C", 20, 30}, {"D", 40, 50}})}, l, 1);
    CHECK(s1[2].prior_actions == std::vector<std::size_t>{2});
}

TEST_CASE("build_samples rejects bad input with its location", "[data][errors]") {
    auto l = abc_labels();
    try {
        build_samples({video("V1", "S1", {{"A", 0, 10}, {"Q", 20, 30}})}, l, 5);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK_THAT(e.what(), Catch::Contains("V1") && Catch::Contains("Q"));
    }
    CHECK_THROWS_AS(build_samples({video("V1", "S1", {{"A", 10, 10}})}, l, 5), ConfigError);
    CHECK_THROWS_AS(build_samples({video("V1", "S1", {}), video("V1", "S2", {})}, l, 5), ConfigError);
}

TEST_CASE("hierarchy consistency detects a tampered sample", "[data]") {
    auto l = abc_labels();
    auto s = build_samples({video("V1", "S1", {{"A", 0, 10}})}, l, 5)[0];
    CHECK(hierarchy_consistent(s, l));
    s.y_coarse[1] = 1.0f;
    CHECK_FALSE(hierarchy_consistent(s, l));
}

TEST_CASE("cross-subject split", "[data]") {
    SubjectPartition p;
    for (int i = 1; i <= 18; ++i) (i <= 11 ? p.train : p.test).push_back("S" + std::to_string(i));
    p.validate();
    std::vector<AnnotatedVideo> vids;
    for (int i = 1; i <= 18; ++i) vids.push_back(video("V" + std::to_string(i), "S" + std::to_string(i), {{"A", 0, 9}}));
    auto split = cross_subject_split(build_samples(vids, abc_labels(), 5), p);
    CHECK(split.train.size() == 11);
    CHECK(split.test.size() == 7);
    std::set<std::string> train_subjects, test_subjects;
    for (auto& s : split.train) train_subjects.insert(s.subject_id);
    for (auto& s : split.test) test_subjects.insert(s.subject_id);
    for (auto& t : test_subjects) CHECK(train_subjects.count(t) == 0);

    SubjectPartition dup{{"S1", "S1"}, {"S2"}};
    CHECK_THROWS_AS(dup.validate(), ConfigError);
    SubjectPartition both{{"S1"}, {"S1"}};
    CHECK_THROWS_AS(both.validate(), ConfigError);
    SubjectPartition empty{{"S1"}, {}};
    CHECK_THROWS_AS(empty.validate(), ConfigError);
}

TEST_CASE("annotation documents parse, round-trip and report errors", "[data]") {
    auto vids = load_annotations(kFixtures / "annotations_small.json");
    REQUIRE(vids.size() == 2);
    CHECK(vids[1].fps == 25.0);
    CHECK(vids[0].events.size() == 4);
    auto again = parse_annotations(format_annotations(vids));
    CHECK(format_annotations(again) == format_annotations(vids));

    try {
        parse_annotations(R"([{"video_id":"V","subject_id":"S","location":"k","events":[{"label":"A","start":1}]}])");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK_THAT(e.what(), Catch::Contains("annotations[0].events[0]") && Catch::Contains("end"));
    }
    CHECK_THROWS_AS(parse_annotations("{}"), ConfigError);
    CHECK_THROWS_AS(parse_annotations("[1"), ConfigError);
}

TEST_CASE("sample manifest from the fixture is deterministic", "[data]") {
    const auto& l = LabelSpace::tsu();
    auto vids = load_annotations(kFixtures / "annotations_small.json");
    auto samples = build_samples(vids, l, 5);
    CHECK(samples.size() == 6);
    auto a = format_sample_manifest(samples, l);
    auto b = format_sample_manifest(build_samples(load_annotations(kFixtures / "annotations_small.json"), l, 5), l);
    CHECK(a == b);
    for (const auto& s : samples) CHECK(hierarchy_consistent(s, l));
    // Drink.From_cup starts after Make_coffee and its pour sub-event end.
    const auto& drink = samples[3];
    CHECK(l.fine_name(drink.defining_label) == "Drink.From_cup");
    CHECK(drink.prior_actions.size() == 3);
}
