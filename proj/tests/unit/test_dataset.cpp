#include <catch2/catch.hpp>

#include <cmath>
#include <map>

#include "hieract/dataset.hpp"
#include "hieract/errors.hpp"
#include "hieract/haf1.hpp"
#include "support.hpp"

using namespace hieract;

namespace {

SynthSpec tiny_spec() {
    SynthSpec s;
    s.n_fine = 6;
    s.n_coarse = 2;
    s.samples_per_class = 4;
    s.events_per_video = 6;
    s.n_subjects = 4;
    s.n_train_subjects = 2;
    s.n_blocks = 3;
    s.block_size = 2;
    s.raw_dim_rgb = 5;
    s.raw_dim_flow = 4;
    s.seed = 3;
    return s;
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) { return read_bytes(p); }

} // namespace

TEST_CASE("synthetic datasets are byte-identical for equal seeds", "[dataset]") {
    testing::TempDir a("synth-a"), b("synth-b");
    auto s = tiny_spec();
    save_dataset(a.path(), synth_dataset(s).dataset);
    save_dataset(b.path(), synth_dataset(s).dataset);
    for (auto name : {"annotations.json", "mapping.csv", "split.json", "features/rgb.haf1", "features/flow.haf1",
                      "features/rgb.haf1.ids"})
        CHECK(file_bytes(a / name) == file_bytes(b / name));
    s.seed = 4;
    testing::TempDir c("synth-c");
    save_dataset(c.path(), synth_dataset(s).dataset);
    CHECK(file_bytes(a / "features/rgb.haf1") != file_bytes(c / "features/rgb.haf1"));
}

TEST_CASE("synthetic samples are hierarchy consistent and feature complete", "[dataset]") {
    auto r = synth_dataset(tiny_spec());
    auto samples = build_samples(r.dataset.videos, r.dataset.labels, 5);
    CHECK(samples.size() == 24);
    for (const auto& s : samples) {
        CHECK(hierarchy_consistent(s, r.dataset.labels));
        CHECK(r.dataset.features.get(Modality::rgb, s.sample_id).shape() == Shape{6, 5});
        CHECK(r.dataset.features.get(Modality::flow, s.sample_id).shape() == Shape{3, 4});
    }
    r.dataset.partition.validate();
    CHECK(r.dataset.labels.fine_name(3) == "group1.act1");
}

TEST_CASE("noise-free synthetic features are classified by their nearest prototype", "[dataset]") {
    auto spec = tiny_spec();
    spec.noise = 0.0;
    spec.overlap_fraction = 0.0;
    auto r = synth_dataset(spec);
    std::size_t hits = 0, total = 0;
    for (const auto& s : build_samples(r.dataset.videos, r.dataset.labels, 5)) {
        auto flow = r.dataset.features.get(Modality::flow, s.sample_id).data();
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t f = 0; f < r.flow_prototypes.size(); ++f) {
            double d = 0;
            auto p = r.flow_prototypes[f].data();
            for (std::size_t i = 0; i < p.size(); ++i) d += (flow[i] - p[i]) * (flow[i] - p[i]);
            if (d < best_d) {
                best_d = d;
                best = f;
            }
        }
        hits += best == s.defining_label;
        ++total;
    }
    CHECK(hits == total);
}

TEST_CASE("Markov chain rows are distributions with the configured block mass", "[dataset]") {
    std::vector<std::size_t> map{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    MarkovChain chain(map, 0.9);
    for (std::size_t i = 0; i < map.size(); ++i) {
        double row = 0, within = 0;
        for (std::size_t j = 0; j < map.size(); ++j) {
            row += chain.probability(i, j);
            if (map[j] == map[i]) within += chain.probability(i, j);
        }
        CHECK(row == Approx(1.0).epsilon(1e-12));
        CHECK(within == Approx(0.9).epsilon(1e-12));
    }
}

TEST_CASE("Markov chain sampling matches its transition probabilities", "[dataset]") {
    std::vector<std::size_t> map{0, 0, 1, 1, 1, 2};
    MarkovChain chain(map, 0.9);
    Rng rng(99);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
    std::vector<std::size_t> from_counts(map.size(), 0);
    std::size_t state = 0;
    const std::size_t steps = 20000;
    for (std::size_t t = 0; t < steps; ++t) {
        std::size_t next = chain.next(state, rng);
        ++counts[{state, next}];
        ++from_counts[state];
        state = next;
    }
    for (std::size_t i = 0; i < map.size(); ++i) {
        REQUIRE(from_counts[i] >= 1000);
        for (std::size_t j = 0; j < map.size(); ++j) {
            double p = chain.probability(i, j);
            double n = static_cast<double>(from_counts[i]);
            double sigma = std::sqrt(n * p * (1 - p));
            double observed = static_cast<double>(counts[{i, j}]);
            CHECK(std::abs(observed - n * p) <= 3.0 * sigma + 1e-9);
        }
    }
}

TEST_CASE("synth spec validation", "[dataset][errors]") {
    auto s = tiny_spec();
    s.n_train_subjects = 4;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = tiny_spec();
    s.within_coarse_mass = 1.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = tiny_spec();
    s.n_coarse = 7;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("feature store and dataset directories round-trip", "[dataset][formats]") {
    auto r = synth_dataset(tiny_spec());
    testing::TempDir dir("dataset");
    save_dataset(dir.path(), r.dataset);
    auto back = load_dataset(dir.path());
    CHECK(back.labels == r.dataset.labels);
    CHECK(back.partition.train == r.dataset.partition.train);
    CHECK(format_annotations(back.videos) == format_annotations(r.dataset.videos));
    auto samples = build_samples(back.videos, back.labels, 5);
    for (const auto& s : samples)
        for (auto m : {Modality::rgb, Modality::flow})
            CHECK(back.features.get(m, s.sample_id).to_vector() == r.dataset.features.get(m, s.sample_id).to_vector());
    CHECK_THROWS_AS(back.features.get(Modality::rgb, "V9999:0000"), MissingIdError);
    CHECK_THROWS_AS(load_dataset(dir / "missing"), ConfigError);
}
