#include "hieract/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hieract/errors.hpp"
#include "hieract/haf1.hpp"

namespace hieract {

namespace {

std::string numbered(const char* prefix, const char* fmt, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, fmt, i);
    return prefix + std::string(buf);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto bytes = std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
    write_bytes(path, bytes);
}

const std::vector<std::string>& location_names() {
    static const std::vector<std::string> names = {"kitchen",  "dining room", "living room", "entrance",
                                                    "bedroom", "bathroom",    "hallway"};
    return names;
}

} // namespace

void FeatureStore::put(Modality m, const std::string& sample_id, Tensor features) {
    if (!features.defined() || features.rank() != 2) {
        throw DimensionError("feature store: " + std::string(to_string(m)) + " features for '" + sample_id +
                             "' must be a matrix");
    }
    table(m)[sample_id] = std::move(features);
}

bool FeatureStore::contains(Modality m, const std::string& sample_id) const { return table(m).count(sample_id) != 0; }

const Tensor& FeatureStore::get(Modality m, const std::string& sample_id) const {
    auto it = table(m).find(sample_id);
    if (it == table(m).end()) {
        throw MissingIdError("no " + std::string(to_string(m)) + " features for sample '" + sample_id + "'");
    }
    return it->second;
}

void FeatureStore::save(const std::filesystem::path& dir) const {
    for (auto m : {Modality::rgb, Modality::flow}) {
        FeatureFile file;
        for (const auto& [id, t] : table(m)) {
            file.ids.push_back(id);
            file.records.push_back(Haf1Record::from_tensor(t));
        }
        write_feature_file(dir / (std::string(to_string(m)) + ".haf1"), file);
    }
}

FeatureStore FeatureStore::load(const std::filesystem::path& dir) {
    FeatureStore store;
    for (auto m : {Modality::rgb, Modality::flow}) {
        auto path = dir / (std::string(to_string(m)) + ".haf1");
        if (!std::filesystem::exists(path)) {
            continue;
        }
        auto file = read_feature_file(path);
        for (std::size_t i = 0; i < file.ids.size(); ++i) {
            if (file.records[i].extents.size() != 2) {
                throw FormatError(path.string() + ": record '" + file.ids[i] + "' has rank " +
                                  std::to_string(file.records[i].extents.size()) + ", expected 2");
            }
            store.put(m, file.ids[i], file.records[i].to_tensor());
        }
    }
    return store;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
    write_text(dir / "annotations.json", format_annotations(dataset.videos));
    write_text(dir / "mapping.csv", format_mapping_csv(dataset.labels));
    nlohmann::ordered_json split = {{"train_subjects", dataset.partition.train},
                                    {"test_subjects", dataset.partition.test}};
    write_text(dir / "split.json", split.dump(2) + "\n");
    dataset.features.save(dir / "features");
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.labels = load_mapping_csv(dir / "mapping.csv");
    ds.videos = load_annotations(dir / "annotations.json");
    auto split_path = dir / "split.json";
    try {
        auto split = nlohmann::json::parse(read_text(split_path));
        ds.partition.train = split.at("train_subjects").get<std::vector<std::string>>();
        ds.partition.test = split.at("test_subjects").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(split_path.string() + ": " + e.what());
    }
    ds.partition.validate();
    ds.features = FeatureStore::load(dir / "features");
    return ds;
}

void SynthSpec::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) {
            throw ConfigError("synth spec: " + msg);
        }
    };
    need(n_coarse >= 1 && n_fine >= n_coarse, "need 1 <= n_coarse <= n_fine");
    need(samples_per_class >= 1, "samples_per_class must be >= 1");
    need(events_per_video >= 1, "events_per_video must be >= 1");
    need(n_subjects >= 2, "n_subjects must be >= 2");
    need(n_train_subjects >= 1 && n_train_subjects < n_subjects, "need 1 <= n_train_subjects < n_subjects");
    need(n_blocks >= 1 && block_size >= 1, "n_blocks and block_size must be >= 1");
    need(raw_dim_rgb >= 1 && raw_dim_flow >= 1, "raw dims must be >= 1");
    need(noise >= 0.0 && prototype_scale > 0.0, "noise must be >= 0 and prototype_scale > 0");
    need(overlap_fraction >= 0.0 && overlap_fraction <= 1.0, "overlap_fraction must lie in [0, 1]");
    need(overlap_mix >= 0.0 && overlap_mix < 1.0, "overlap_mix must lie in [0, 1)");
    need(within_coarse_mass >= 0.0 && within_coarse_mass <= 1.0, "within_coarse_mass must lie in [0, 1]");
    need(n_locations >= 1 && n_locations <= location_names().size(),
         "n_locations must lie in [1, " + std::to_string(location_names().size()) + "]");
}

MarkovChain::MarkovChain(std::vector<std::size_t> fine_to_coarse, double within_coarse_mass)
    : fine_to_coarse_(std::move(fine_to_coarse)), within_(within_coarse_mass) {
    const std::size_t n = fine_to_coarse_.size();
    cumulative_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += probability(i, j);
            cumulative_[i].push_back(acc);
        }
    }
}

double MarkovChain::probability(std::size_t from, std::size_t to) const {
    const std::size_t n = fine_to_coarse_.size();
    std::size_t same = 0;
    for (auto c : fine_to_coarse_) {
        same += c == fine_to_coarse_[from] ? 1 : 0;
    }
    const std::size_t other = n - same;
    if (fine_to_coarse_[to] == fine_to_coarse_[from]) {
        return (other == 0 ? 1.0 : within_) / static_cast<double>(same);
    }
    return (1.0 - within_) / static_cast<double>(other);
}

std::size_t MarkovChain::next(std::size_t from, Rng& rng) const {
    const auto& cdf = cumulative_.at(from);
    double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

LabelSpace synth_label_space(std::size_t n_fine, std::size_t n_coarse) {
    if (n_fine == 51 && n_coarse == 7) {
        return LabelSpace::tsu();
    }
    std::vector<std::string> coarse;
    for (std::size_t c = 0; c < n_coarse; ++c) {
        coarse.push_back("group" + std::to_string(c));
    }
    std::vector<std::string> fine;
    std::vector<std::size_t> map;
    for (std::size_t f = 0; f < n_fine; ++f) {
        map.push_back(f % n_coarse);
        fine.push_back(coarse[f % n_coarse] + ".act" + std::to_string(f / n_coarse));
    }
    return LabelSpace(std::move(fine), std::move(coarse), std::move(map));
}

SynthResult synth_dataset(const SynthSpec& spec) {
    spec.validate();
    SynthResult out;
    auto& ds = out.dataset;
    ds.labels = synth_label_space(spec.n_fine, spec.n_coarse);
    MarkovChain chain(ds.labels.fine_to_coarse(), spec.within_coarse_mass);

    const std::size_t window = spec.n_blocks * spec.block_size;
    const std::size_t total = spec.n_fine * spec.samples_per_class;
    const std::size_t n_videos = (total + spec.events_per_video - 1) / spec.events_per_video;
    Rng rng(derive_seed(spec.seed, "synth.videos"));
    for (std::size_t v = 0; v < n_videos; ++v) {
        AnnotatedVideo video;
        video.video_id = numbered("V", "%04zu", v + 1);
        video.subject_id = numbered("S", "%02zu", v % spec.n_subjects + 1);
        video.location = location_names()[rng.below(spec.n_locations)];
        std::size_t label = rng.below(spec.n_fine);
        auto start = static_cast<std::int64_t>(rng.below(50));
        for (std::size_t e = 0; e < spec.events_per_video; ++e) {
            if (e > 0) {
                label = chain.next(label, rng);
            }
            auto len = static_cast<std::int64_t>(window + rng.below(window / 2 + 1));
            std::int64_t end = start + len - 1;
            video.events.push_back({ds.labels.fine_name(label), start, end});
            if (rng.uniform() < spec.overlap_fraction) {
                start = end - static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(len / 3) + 1));
            } else {
                start = end + 1 + static_cast<std::int64_t>(rng.below(2 * spec.block_size + 1));
            }
        }
        ds.videos.push_back(std::move(video));
    }

    Rng proto_rng(derive_seed(spec.seed, "synth.prototypes"));
    auto prototype = [&](std::size_t dim) {
        auto values = init_normal<float>(proto_rng, spec.n_blocks * dim, spec.prototype_scale);
        return Tensor::from_vector(std::move(values), {spec.n_blocks, dim});
    };
    for (std::size_t f = 0; f < spec.n_fine; ++f) {
        out.rgb_prototypes.push_back(prototype(spec.raw_dim_rgb));
    }
    for (std::size_t f = 0; f < spec.n_fine; ++f) {
        out.flow_prototypes.push_back(prototype(spec.raw_dim_flow));
    }

    for (const auto& s : build_samples(ds.videos, ds.labels, 0)) {
        std::size_t partner = s.defining_label;
        for (std::size_t f = 0; f < s.y_fine.size(); ++f) {
            if (f != s.defining_label && s.y_fine[f] != 0.0f) {
                partner = f;
                break;
            }
        }
        const double mix = partner == s.defining_label ? 0.0 : spec.overlap_mix;
        Rng noise(derive_seed(spec.seed, "synth.noise:" + s.sample_id));
        auto render = [&](const std::vector<Tensor>& protos, std::size_t rows, std::size_t per_block) {
            const std::size_t dim = protos.front().shape()[1];
            auto a = protos[s.defining_label].data();
            auto b = protos[partner].data();
            std::vector<float> values(rows * dim);
            for (std::size_t r = 0; r < rows; ++r) {
                std::size_t block = r / per_block;
                for (std::size_t k = 0; k < dim; ++k) {
                    double base = (1.0 - mix) * a[block * dim + k] + mix * b[block * dim + k];
                    values[r * dim + k] = static_cast<float>(base + spec.noise * noise.normal());
                }
            }
            return Tensor::from_vector(std::move(values), {rows, dim});
        };
        ds.features.put(Modality::rgb, s.sample_id, render(out.rgb_prototypes, window, spec.block_size));
        ds.features.put(Modality::flow, s.sample_id, render(out.flow_prototypes, spec.n_blocks, 1));
    }

    for (std::size_t i = 0; i < spec.n_subjects; ++i) {
        auto id = numbered("S", "%02zu", i + 1);
        (i < spec.n_train_subjects ? ds.partition.train : ds.partition.test).push_back(id);
    }
    return out;
}

} // namespace hieract
