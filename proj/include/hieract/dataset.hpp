#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hieract/data.hpp"
#include "hieract/labels.hpp"
#include "hieract/random.hpp"
#include "hieract/tensor.hpp"
#include "hieract/video.hpp"

namespace hieract {

/// Raw per-sample features keyed by sample id. rgb rows are frames, flow
/// rows are block_size-frame windows.
class FeatureStore {
public:
    void put(Modality m, const std::string& sample_id, Tensor features);
    bool contains(Modality m, const std::string& sample_id) const;
    /// Throws MissingIdError naming the modality and sample.
    const Tensor& get(Modality m, const std::string& sample_id) const;
    std::size_t size(Modality m) const { return table(m).size(); }

    /// dir/rgb.haf1 and dir/flow.haf1, each with an id sidecar.
    void save(const std::filesystem::path& dir) const;
    static FeatureStore load(const std::filesystem::path& dir);

private:
    const std::map<std::string, Tensor>& table(Modality m) const { return m == Modality::rgb ? rgb_ : flow_; }
    std::map<std::string, Tensor>& table(Modality m) { return m == Modality::rgb ? rgb_ : flow_; }

    std::map<std::string, Tensor> rgb_;
    std::map<std::string, Tensor> flow_;
};

/// Everything a run reads from disk.
struct Dataset {
    LabelSpace labels;
    std::vector<AnnotatedVideo> videos;
    FeatureStore features;
    SubjectPartition partition;
};

/// Layout: annotations.json, mapping.csv, split.json, features/{rgb,flow}.haf1.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

struct SynthSpec {
    std::size_t n_fine = 51;
    std::size_t n_coarse = 7;
    std::size_t samples_per_class = 8; // average; total events = n_fine * samples_per_class rounded up to whole videos
    std::size_t events_per_video = 8;
    std::size_t n_subjects = 18;
    std::size_t n_train_subjects = 11;
    std::size_t n_blocks = 8;
    std::size_t block_size = 5;
    std::size_t raw_dim_rgb = 64;
    std::size_t raw_dim_flow = 64;
    double noise = 1.0;
    double prototype_scale = 1.0;
    double overlap_fraction = 0.1; // chance that an event overlaps its successor
    double overlap_mix = 0.3;      // weight of the second prototype on overlapped samples
    double within_coarse_mass = 0.9;
    std::size_t n_locations = 4;
    std::uint64_t seed = 0;

    void validate() const;
};

/// First-order chain over fine classes: from class i, mass within_coarse_mass
/// is spread uniformly over classes sharing i's coarse class (i included), the
/// rest uniformly over all other classes.
class MarkovChain {
public:
    MarkovChain(std::vector<std::size_t> fine_to_coarse, double within_coarse_mass);

    double probability(std::size_t from, std::size_t to) const;
    std::size_t next(std::size_t from, Rng& rng) const;
    std::size_t size() const { return fine_to_coarse_.size(); }

private:
    std::vector<std::size_t> fine_to_coarse_;
    std::vector<std::vector<double>> cumulative_;
    double within_;
};

struct SynthResult {
    Dataset dataset;
    std::vector<Tensor> rgb_prototypes;  // per fine class, n_blocks x raw_dim_rgb
    std::vector<Tensor> flow_prototypes; // per fine class, n_blocks x raw_dim_flow
};

/// Label space used by synth: the shipped one for 51/7, otherwise
/// "group{c}.act{j}" names with fine class f in group f mod n_coarse.
LabelSpace synth_label_space(std::size_t n_fine, std::size_t n_coarse);

/// Fully determined by spec (including its seed).
SynthResult synth_dataset(const SynthSpec& spec);

} // namespace hieract
