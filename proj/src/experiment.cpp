#include "hieract/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hieract/errors.hpp"
#include "hieract/random.hpp"

namespace hieract {

namespace {

using ordered_json = nlohmann::ordered_json;

/// Object reader that remembers which keys were consumed.
class Fields {
public:
    Fields(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ConfigError("config: '" + display() + "' must be an object");
        }
    }

    template <typename V>
    void read(const char* key, V& out) {
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        used_.insert(key);
        try {
            out = it->template get<V>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: '" + qualify(key) + "' has the wrong type (" + it->type_name() + ")");
        }
    }

    template <typename E, typename Parse>
    void read_enum(const char* key, E& out, Parse parse) {
        std::string s;
        bool present = obj_.contains(key);
        read(key, s);
        if (present) {
            try {
                out = parse(s);
            } catch (const ConfigError& e) {
                throw ConfigError("config: '" + qualify(key) + "': " + e.what());
            }
        }
    }

    /// Nested object, or nullptr when absent.
    const nlohmann::json* child(const char* key) {
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            return nullptr;
        }
        used_.insert(key);
        return &*it;
    }

    std::string qualify(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!used_.count(it.key())) {
                throw ConfigError("config: unknown key '" + qualify(it.key()) + "'");
            }
        }
    }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const nlohmann::json& obj_;
    std::string path_;
    std::set<std::string> used_;
};

ordered_json encoder_json(const EncoderConfig& e) {
    return {{"n_layers", e.n_layers},
            {"n_heads", e.n_heads},
            {"embed_dim", e.embed_dim},
            {"pos_encoding", to_string(e.pos_encoding)},
            {"pooling", to_string(e.pooling)},
            {"ffn_hidden", e.ffn_hidden}};
}

void read_encoder(const nlohmann::json& doc, const std::string& path, EncoderConfig& e) {
    Fields f(doc, path);
    f.read("n_layers", e.n_layers);
    f.read("n_heads", e.n_heads);
    f.read("embed_dim", e.embed_dim);
    f.read_enum("pos_encoding", e.pos_encoding, parse_pos_encoding);
    f.read_enum("pooling", e.pooling, parse_pooling);
    f.read("ffn_hidden", e.ffn_hidden);
    f.finish();
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

void ExperimentConfig::validate() const {
    if (synth.has_value() == !dataset_dir.empty()) {
        throw ConfigError("config: set exactly one of 'data.dataset_dir' and 'data.synth'");
    }
    if (synth) {
        synth->validate();
        if (synth->raw_dim_rgb != model.video.raw_dim_rgb || synth->raw_dim_flow != model.video.raw_dim_flow) {
            throw ConfigError("config: video raw dims (" + std::to_string(model.video.raw_dim_rgb) + ", " +
                              std::to_string(model.video.raw_dim_flow) + ") differ from data.synth raw dims (" +
                              std::to_string(synth->raw_dim_rgb) + ", " + std::to_string(synth->raw_dim_flow) + ")");
        }
    }
    model.validate();
    train.validate();
    context.validate();
    static const std::set<std::size_t> allowed_past = {1, 3, 5, 7};
    if (!allowed_past.count(context.n_past)) {
        throw ConfigError("config: context.n_past must be one of 1, 3, 5, 7 (got " + std::to_string(context.n_past) +
                          ")");
    }
    if (ks.empty() || std::find(ks.begin(), ks.end(), std::size_t{0}) != ks.end()) {
        throw ConfigError("config: eval.k must list positive integers");
    }
    if (eval_context == ContextMode::predicted && !model.modalities.text) {
        throw ConfigError("config: eval.context_mode 'predicted' needs the text modality (modalities '" +
                          model.modalities.to_string() + "')");
    }
}

ordered_json synth_to_json(const SynthSpec& s) {
    return {{"n_fine", s.n_fine},
            {"n_coarse", s.n_coarse},
            {"samples_per_class", s.samples_per_class},
            {"events_per_video", s.events_per_video},
            {"n_subjects", s.n_subjects},
            {"n_train_subjects", s.n_train_subjects},
            {"n_blocks", s.n_blocks},
            {"block_size", s.block_size},
            {"raw_dim_rgb", s.raw_dim_rgb},
            {"raw_dim_flow", s.raw_dim_flow},
            {"noise", s.noise},
            {"prototype_scale", s.prototype_scale},
            {"overlap_fraction", s.overlap_fraction},
            {"overlap_mix", s.overlap_mix},
            {"within_coarse_mass", s.within_coarse_mass},
            {"n_locations", s.n_locations},
            {"seed", s.seed}};
}

namespace {

void read_synth(const nlohmann::json& doc, const std::string& path, SynthSpec& s) {
    Fields f(doc, path);
    f.read("n_fine", s.n_fine);
    f.read("n_coarse", s.n_coarse);
    f.read("samples_per_class", s.samples_per_class);
    f.read("events_per_video", s.events_per_video);
    f.read("n_subjects", s.n_subjects);
    f.read("n_train_subjects", s.n_train_subjects);
    f.read("n_blocks", s.n_blocks);
    f.read("block_size", s.block_size);
    f.read("raw_dim_rgb", s.raw_dim_rgb);
    f.read("raw_dim_flow", s.raw_dim_flow);
    f.read("noise", s.noise);
    f.read("prototype_scale", s.prototype_scale);
    f.read("overlap_fraction", s.overlap_fraction);
    f.read("overlap_mix", s.overlap_mix);
    f.read("within_coarse_mass", s.within_coarse_mass);
    f.read("n_locations", s.n_locations);
    f.read("seed", s.seed);
    f.finish();
}

} // namespace

SynthSpec synth_from_json(const nlohmann::json& doc) {
    SynthSpec s;
    read_synth(doc, "", s);
    return s;
}

ordered_json to_json(const ExperimentConfig& c) {
    const auto& m = c.model;
    ordered_json data = ordered_json::object();
    if (c.synth) {
        data["synth"] = synth_to_json(*c.synth);
    } else {
        data["dataset_dir"] = c.dataset_dir;
    }
    return {{"seed", c.seed},
            {"data", data},
            {"text", {{"seed", c.text_seed}}},
            {"video",
             {{"n_blocks", m.video.n_blocks},
              {"block_size", m.video.block_size},
              {"fps", m.video.fps},
              {"raw_dim_rgb", m.video.raw_dim_rgb},
              {"raw_dim_flow", m.video.raw_dim_flow},
              {"visual_fusion", to_string(m.video.visual_fusion)},
              {"encoder", encoder_json(m.video.encoder)}}},
            {"fusion",
             {{"strategy", to_string(m.fusion.strategy)},
              {"n_layers", m.fusion.n_layers},
              {"n_heads", m.fusion.n_heads},
              {"fuse_dim", m.fusion.fuse_dim},
              {"ffn_hidden", m.fusion.ffn_hidden}}},
            {"model",
             {{"hierarchy_strategy", to_string(m.strategy)},
              {"modalities", m.modalities.to_string()},
              {"joint_loss", m.joint_loss},
              {"text_dim", m.text_dim},
              {"trunk_dim", m.trunk_dim}}},
            {"train",
             {{"base_lr", c.train.base_lr},
              {"weight_decay", c.train.weight_decay},
              {"epochs", c.train.epochs},
              {"batch_size", c.train.batch_size},
              {"warmup_epochs", c.train.warmup_epochs},
              {"patience", c.train.patience},
              {"clip_norm", c.train.clip_norm}}},
            {"context",
             {{"n_past", c.context.n_past},
              {"include_location", c.context.include_location},
              {"template", c.context.template_version}}},
            {"eval", {{"context_mode", to_string(c.eval_context)}, {"k", c.ks}}}};
}

ExperimentConfig experiment_from_json(const nlohmann::json& doc) {
    ExperimentConfig c;
    Fields root(doc, "");
    root.read("seed", c.seed);
    if (const auto* data = root.child("data")) {
        Fields f(*data, "data");
        f.read("dataset_dir", c.dataset_dir);
        if (const auto* synth = f.child("synth")) {
            SynthSpec s;
            read_synth(*synth, "data.synth", s);
            c.synth = s;
        }
        f.finish();
    }
    if (const auto* text = root.child("text")) {
        Fields f(*text, "text");
        f.read("seed", c.text_seed);
        f.finish();
    }
    auto& m = c.model;
    if (const auto* video = root.child("video")) {
        Fields f(*video, "video");
        f.read("n_blocks", m.video.n_blocks);
        f.read("block_size", m.video.block_size);
        f.read("fps", m.video.fps);
        f.read("raw_dim_rgb", m.video.raw_dim_rgb);
        f.read("raw_dim_flow", m.video.raw_dim_flow);
        f.read_enum("visual_fusion", m.video.visual_fusion, parse_visual_fusion);
        if (const auto* enc = f.child("encoder")) {
            read_encoder(*enc, "video.encoder", m.video.encoder);
        }
        f.finish();
    }
    if (const auto* fusion = root.child("fusion")) {
        Fields f(*fusion, "fusion");
        f.read_enum("strategy", m.fusion.strategy, parse_fusion_strategy);
        f.read("n_layers", m.fusion.n_layers);
        f.read("n_heads", m.fusion.n_heads);
        f.read("fuse_dim", m.fusion.fuse_dim);
        f.read("ffn_hidden", m.fusion.ffn_hidden);
        f.finish();
    }
    if (const auto* model = root.child("model")) {
        Fields f(*model, "model");
        f.read_enum("hierarchy_strategy", m.strategy, parse_hierarchy_strategy);
        f.read_enum("modalities", m.modalities, ModalitySet::parse);
        f.read("joint_loss", m.joint_loss);
        f.read("text_dim", m.text_dim);
        f.read("trunk_dim", m.trunk_dim);
        f.finish();
    }
    if (const auto* train = root.child("train")) {
        Fields f(*train, "train");
        f.read("base_lr", c.train.base_lr);
        f.read("weight_decay", c.train.weight_decay);
        f.read("epochs", c.train.epochs);
        f.read("batch_size", c.train.batch_size);
        f.read("warmup_epochs", c.train.warmup_epochs);
        f.read("patience", c.train.patience);
        f.read("clip_norm", c.train.clip_norm);
        f.finish();
    }
    if (const auto* context = root.child("context")) {
        Fields f(*context, "context");
        f.read("n_past", c.context.n_past);
        f.read("include_location", c.context.include_location);
        f.read("template", c.context.template_version);
        f.finish();
    }
    if (const auto* eval = root.child("eval")) {
        Fields f(*eval, "eval");
        f.read_enum("context_mode", c.eval_context, parse_context_mode);
        f.read("k", c.ks);
        f.finish();
    }
    root.finish();
    c.train.seed = c.seed;
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    auto cfg = experiment_from_json(doc);
    if (!cfg.dataset_dir.empty()) {
        std::filesystem::path dir(cfg.dataset_dir);
        if (dir.is_relative()) {
            cfg.dataset_dir = (path.parent_path() / dir).lexically_normal().string();
        }
    }
    return cfg;
}

std::string canonical_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(); }

std::string config_digest(const ExperimentConfig& cfg) { return hex64(fnv1a64(canonical_config(cfg))); }

ordered_json MetricsReport::to_json() const {
    auto value_at = [&](std::size_t k, bool coarse) -> ordered_json {
        for (const auto& r : eval.rows) {
            if (r.k == k) {
                if (!coarse) {
                    return r.fine;
                }
                return r.coarse ? ordered_json(*r.coarse) : ordered_json(nullptr);
            }
        }
        return nullptr;
    };
    ordered_json topk = ordered_json::array();
    for (const auto& r : eval.rows) {
        topk.push_back({{"k", r.k},
                        {"fine", r.fine},
                        {"fine_any", r.fine_any},
                        {"coarse", r.coarse ? ordered_json(*r.coarse) : ordered_json(nullptr)}});
    }
    return {{"loss_curve", loss_curve},
            {"fine_top1", value_at(1, false)},
            {"fine_top5", value_at(5, false)},
            {"coarse_top1", value_at(1, true)},
            {"coarse_top5", value_at(5, true)},
            {"best_epoch", best_epoch},
            {"context_mode", hieract::to_string(context_mode)},
            {"config_digest", config_digest},
            {"seed", seed},
            {"epochs_run", epochs_run},
            {"validation_top1", validation_top1},
            {"n_samples", eval.n_samples},
            {"topk", topk}};
}

std::shared_ptr<const Dataset> load_experiment_dataset(const ExperimentConfig& cfg) {
    if (cfg.synth) {
        return std::make_shared<const Dataset>(synth_dataset(*cfg.synth).dataset);
    }
    return std::make_shared<const Dataset>(load_dataset(cfg.dataset_dir));
}

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    dataset_ = load_experiment_dataset(cfg_);
    init();
}

Experiment::Experiment(ExperimentConfig cfg, std::shared_ptr<const Dataset> dataset)
    : cfg_(std::move(cfg)), dataset_(std::move(dataset)) {
    cfg_.validate();
    init();
}

void Experiment::init() {
    cfg_.train.seed = cfg_.seed;
    const auto& labels = dataset_->labels;
    model_cfg_ = cfg_.model;
    model_cfg_.n_fine = labels.n_fine();
    model_cfg_.n_coarse = labels.n_coarse();
    if (model_cfg_.modalities.text) {
        embedder_ = std::make_unique<HashingTextEmbedder>(model_cfg_.text_dim, cfg_.text_seed);
    }
    preparer_ = std::make_unique<InputPreparer>(model_cfg_, labels, dataset_->features, embedder_.get(), cfg_.context);
    samples_ = build_samples(dataset_->videos, labels, cfg_.context.n_past);
    split_ = cross_subject_split(samples_, dataset_->partition);
    if (split_.train.empty() || split_.test.empty()) {
        throw ConfigError("the subject split leaves " + std::to_string(split_.train.size()) + " training and " +
                          std::to_string(split_.test.size()) + " test samples; both must be nonempty");
    }
    train_ = preparer_->prepare(split_.train);
    test_ = preparer_->prepare(split_.test);
}

Model<float> Experiment::make_model() const { return Model<float>(model_cfg_, derive_seed(cfg_.seed, "model")); }

MetricsReport Experiment::evaluate(const Model<float>& model, ContextMode mode, std::vector<std::size_t> ks) const {
    if (ks.empty()) {
        ks = cfg_.ks;
    }
    for (std::size_t k : {std::size_t{1}, std::size_t{5}}) {
        if (std::find(ks.begin(), ks.end(), k) == ks.end()) {
            ks.push_back(k);
        }
    }
    std::sort(ks.begin(), ks.end());
    MetricsReport report;
    ModelPredictor predictor(model);
    report.eval = hieract::evaluate(predictor, test_, *preparer_, ks, mode);
    report.context_mode = mode;
    report.config_digest = digest();
    report.seed = cfg_.seed;
    return report;
}

MetricsReport Experiment::run(Model<float>& model) const {
    auto fitted = fit(model, train_, test_, *preparer_, cfg_.train);
    auto report = evaluate(model, cfg_.eval_context);
    report.loss_curve = fitted.loss_curve;
    report.validation_top1 = fitted.validation_top1;
    report.best_epoch = fitted.best_epoch;
    report.epochs_run = fitted.epochs_run;
    return report;
}

} // namespace hieract
