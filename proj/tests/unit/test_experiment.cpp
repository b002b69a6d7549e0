#include <catch2/catch.hpp>

#include <fstream>
#include <set>

#include "hieract/ablation.hpp"
#include "hieract/errors.hpp"
#include "hieract/experiment.hpp"
#include "hieract/gradcheck.hpp"
#include "support.hpp"

using namespace hieract;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ExperimentConfig tiny_experiment() {
    ExperimentConfig c;
    c.seed = 5;
    SynthSpec s;
    s.n_fine = 5;
    s.n_coarse = 2;
    s.samples_per_class = 4;
    s.events_per_video = 5;
    s.n_subjects = 2;
    s.n_train_subjects = 1;
    s.n_blocks = 3;
    s.block_size = 1;
    s.raw_dim_rgb = 5;
    s.raw_dim_flow = 4;
    s.seed = 5;
    c.synth = s;
    c.model = gradcheck_reference_config(HierarchyStrategy::separate_classifier);
    c.train.base_lr = 1e-2;
    c.train.epochs = 3;
    c.train.batch_size = 4;
    c.train.warmup_epochs = 1;
    c.train.patience = 3;
    c.train.seed = c.seed;
    return c;
}

} // namespace

TEST_CASE("experiment config JSON round-trips", "[experiment]") {
    auto c = tiny_experiment();
    c.model.strategy = HierarchyStrategy::shared_classifier;
    c.model.modalities = ModalitySet::parse("rgb+text");
    c.context.n_past = 3;
    c.context.include_location = false;
    c.eval_context = ContextMode::predicted;
    c.ks = {1, 3};
    auto back = experiment_from_json(json::parse(to_json(c).dump()));
    CHECK(canonical_config(back) == canonical_config(c));
    CHECK(config_digest(back) == config_digest(c));
    CHECK(back.model.strategy == HierarchyStrategy::shared_classifier);
    CHECK(back.ks == std::vector<std::size_t>{1, 3});
    CHECK(back.synth->n_fine == 5);
}

TEST_CASE("config digests are 16 hex digits and track every field", "[experiment]") {
    auto c = tiny_experiment();
    auto d = config_digest(c);
    REQUIRE(d.size() == 16);
    CHECK(d.find_first_not_of("0123456789abcdef") == std::string::npos);
    auto c2 = c;
    c2.train.base_lr *= 2;
    CHECK(config_digest(c2) != d);
    c2 = c;
    c2.context.template_version = "v2";
    CHECK(config_digest(c2) != d);
    c2 = c;
    c2.synth->noise += 0.5;
    CHECK(config_digest(c2) != d);
}

TEST_CASE("unknown config keys name their path", "[experiment][errors]") {
    auto doc = json::parse(to_json(tiny_experiment()).dump());
    doc["train"]["learning_rate"] = 0.1;
    try {
        experiment_from_json(doc);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK_THAT(e.what(), Catch::Contains("train.learning_rate"));
    }
    doc = json::parse(to_json(tiny_experiment()).dump());
    doc["data"]["synth"]["n_fien"] = 3;
    CHECK_THROWS_WITH(experiment_from_json(doc), Catch::Contains("data.synth.n_fien"));
    doc = json::parse(to_json(tiny_experiment()).dump());
    doc["model"]["hierarchy_strategy"] = "joint";
    CHECK_THROWS_AS(experiment_from_json(doc), ConfigError);
    doc = json::parse(to_json(tiny_experiment()).dump());
    doc["train"]["epochs"] = "ten";
    CHECK_THROWS_AS(experiment_from_json(doc), ConfigError);
}

TEST_CASE("missing keys keep defaults", "[experiment]") {
    auto c = experiment_from_json(json::parse(R"({"seed": 9, "data": {"dataset_dir": "d"}})"));
    CHECK(c.seed == 9);
    CHECK(c.train.seed == 9);
    CHECK(c.dataset_dir == "d");
    CHECK(c.train.base_lr == TrainConfig{}.base_lr);
    CHECK(c.model.strategy == ModelConfig{}.strategy);
}

TEST_CASE("relative dataset directories resolve against the config file", "[experiment]") {
    testing::TempDir dir("config");
    std::filesystem::create_directories(dir / "configs");
    {
        std::ofstream out(dir / "configs" / "run.json");
        out << R"({"data": {"dataset_dir": "../datasets/tiny"}})";
    }
    auto c = load_experiment_config(dir / "configs" / "run.json");
    CHECK(std::filesystem::path(c.dataset_dir) == (dir.path() / "datasets" / "tiny").lexically_normal());
    CHECK_THROWS_AS(load_experiment_config(dir / "absent.json"), ConfigError);
    {
        std::ofstream out(dir / "bad.json");
        out << "{not json";
    }
    CHECK_THROWS_AS(load_experiment_config(dir / "bad.json"), ConfigError);
}

TEST_CASE("experiment validation requires exactly one data source", "[experiment][errors]") {
    auto c = tiny_experiment();
    c.dataset_dir = "somewhere";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_experiment();
    c.synth.reset();
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("metrics reports carry the documented keys", "[experiment]") {
    Experiment exp(tiny_experiment());
    CHECK(exp.model_config().n_fine == 5);
    CHECK(exp.model_config().n_coarse == 2);
    CHECK(exp.train_set().size() + exp.test_set().size() == exp.samples().size());
    auto model = exp.make_model();
    auto report = exp.run(model);
    auto j = report.to_json();
    for (const char* key : {"loss_curve", "fine_top1", "fine_top5", "coarse_top1", "coarse_top5", "best_epoch",
                            "context_mode", "config_digest", "seed", "epochs_run", "validation_top1", "n_samples"})
        CHECK(j.contains(key));
    CHECK(j["config_digest"] == exp.digest());
    CHECK(j["loss_curve"].size() == report.epochs_run);
    CHECK(report.fine_top(1) <= report.fine_top(5));
    CHECK(report.fine_top(5) == 1.0); // five classes
}

TEST_CASE("ablation grids parse with aliases", "[ablation]") {
    auto axes = parse_ablation_grid(ordered_json::parse(R"({"positional_encoding": ["none", "fixed", "learnable"]})"));
    REQUIRE(axes.size() == 1);
    CHECK(axes[0].name == "pos_encoding");
    CHECK(axes[0].values.size() == 3);
    axes = parse_ablation_grid(ordered_json::parse(R"({"axes": {"strategy": ["contextual_data"], "fusion_layers": [1, 2]}})"));
    REQUIRE(axes.size() == 2);
    CHECK(axes[0].name == "hierarchy_strategy");
    CHECK(axes[1].name == "fuse_layers");
    auto names = ablation_axis_names();
    CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
}

TEST_CASE("ablation grid errors", "[ablation][errors]") {
    CHECK_THROWS_WITH(parse_ablation_grid(ordered_json::parse(R"({"dropout": [0.1]})")), Catch::Contains("dropout"));
    CHECK_THROWS_AS(parse_ablation_grid(ordered_json::parse(R"({"n_past": []})")), ConfigError);
    CHECK_THROWS_AS(parse_ablation_grid(ordered_json::parse("{}")), ConfigError);
    CHECK_THROWS_AS(parse_ablation_grid(ordered_json::parse(R"({"strategy": ["a"], "hierarchy_strategy": ["b"]})")),
                    ConfigError);
    auto c = tiny_experiment();
    CHECK_THROWS_AS(apply_ablation_value(c, "pos_encoding", json("sinusoid")), ConfigError);
    CHECK_THROWS_AS(apply_ablation_value(c, "n_past", json("three")), ConfigError);
    apply_ablation_value(c, "n_past", json(3));
    CHECK(c.context.n_past == 3);
}

TEST_CASE("positional-encoding ablation gives one row per value", "[ablation]") {
    auto base = tiny_experiment();
    auto axes = parse_ablation_grid(ordered_json::parse(R"({"pos_encoding": ["none", "fixed", "learnable"]})"));
    std::size_t seen = 0;
    auto cells = run_ablation(base, axes, [&](const AblationCell&) { ++seen; });
    REQUIRE(cells.size() == 3);
    CHECK(seen == 3);
    std::set<std::string> labels;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        labels.insert(cells[i].label);
        CHECK(cells[i].digest == config_digest(cells[i].config));
        if (i > 0) CHECK(cells[i - 1].report.fine_top(1) >= cells[i].report.fine_top(1));
    }
    CHECK(labels == std::set<std::string>{"pos_encoding=none", "pos_encoding=fixed", "pos_encoding=learnable"});
    auto table = format_ablation_table(cells);
    for (const auto& c : cells) CHECK_THAT(table, Catch::Contains(c.digest));
}

TEST_CASE("hierarchy ablation cells match standalone runs", "[ablation]") {
    auto base = tiny_experiment();
    base.train.epochs = 2;
    auto axes = parse_ablation_grid(json::parse(
        R"({"hierarchy_strategy": ["contextual_data", "separate_fusion", "separate_classifier", "shared_classifier"]})"));
    auto cells = run_ablation(base, axes);
    REQUIRE(cells.size() == 4);
    const auto& cell = cells.front();
    Experiment exp(cell.config);
    auto model = exp.make_model();
    auto report = exp.run(model);
    CHECK(report.config_digest == cell.digest);
    CHECK(report.loss_curve == cell.report.loss_curve);
    CHECK(report.fine_top(1) == cell.report.fine_top(1));
}

TEST_CASE("invalid ablation cells are reported with their label", "[ablation][errors]") {
    auto base = tiny_experiment();
    auto axes = parse_ablation_grid(ordered_json::parse(R"({"modalities": ["rgb+flow"], "strategy": ["contextual_data"]})"));
    CHECK_THROWS_WITH(run_ablation(base, axes), Catch::Contains("modalities=rgb+flow"));
}

TEST_CASE("relative error uses the larger magnitude and a floor", "[gradcheck]") {
    CHECK(relative_error(1.0, 1.0, 1e-3) == 0.0);
    CHECK(relative_error(2.0, 1.0, 1e-3) == Approx(0.5));
    CHECK(relative_error(-1.0, 1.0, 1e-3) == Approx(2.0));
    CHECK(relative_error(1e-6, 0.0, 1e-3) == Approx(1e-3));
}

TEST_CASE("every differentiable operation passes its gradient check", "[gradcheck]") {
    auto rows = gradcheck_operations(GradcheckOptions{});
    REQUIRE(rows.size() >= 15);
    std::set<std::string> names;
    for (const auto& r : rows) {
        INFO(r.name << " max rel error " << r.max_rel_error);
        names.insert(r.name);
        CHECK(r.n_checked > 0);
        CHECK(r.passed());
    }
    CHECK(names.size() == rows.size());
}

TEST_CASE("check_function flags a wrong derivative", "[gradcheck]") {
    // Detaching one factor halves the reverse-mode gradient of x * x.
    GradcheckOptions o;
    auto x = testing::tensor64({0.9995, 2.0004}, {2});
    auto row = check_function("square", [](const std::vector<Tensor64>& in) { return mul(in[0], in[0]); }, {x}, o);
    CHECK(row.passed());
    auto bad = check_function(
        "detached", [](const std::vector<Tensor64>& in) { return mul(in[0], in[0].detach()); }, {x}, o);
    CHECK_FALSE(bad.passed());
}
