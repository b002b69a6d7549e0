#include "hieract/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "hieract/errors.hpp"
#include "hieract/haf1.hpp"

namespace hieract {

namespace {

constexpr std::string_view kFormat = "hieract-checkpoint";

} // namespace

void save_checkpoint(const std::filesystem::path& dir, const ParameterStore<float>& store,
                     std::string_view config_digest) {
    FeatureFile file;
    for (const auto& p : store.items()) {
        file.ids.push_back(p.name);
        file.records.push_back(Haf1Record::from_tensor(p.tensor));
    }
    write_feature_file(dir / "params.haf1", file);
    nlohmann::ordered_json manifest = {{"format", kFormat},
                                       {"version", kCheckpointVersion},
                                       {"config_digest", config_digest},
                                       {"n_parameters", store.size()}};
    auto text = manifest.dump(2) + "\n";
    write_bytes(dir / "manifest.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir) {
    auto path = dir / "manifest.json";
    auto bytes = read_bytes(path);
    CheckpointInfo info;
    try {
        auto doc = nlohmann::json::parse(bytes.begin(), bytes.end());
        if (doc.at("format").get<std::string>() != kFormat) {
            throw FormatError(path.string() + ": not a checkpoint manifest");
        }
        info.version = doc.at("version").get<int>();
        info.config_digest = doc.at("config_digest").get<std::string>();
        info.n_parameters = doc.at("n_parameters").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (info.version != kCheckpointVersion) {
        throw FormatError(path.string() + ": checkpoint version " + std::to_string(info.version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    return info;
}

void load_checkpoint(const std::filesystem::path& dir, ParameterStore<float>& store,
                     std::string_view expected_digest) {
    auto info = read_checkpoint_info(dir);
    if (info.config_digest != expected_digest) {
        throw ConfigError("checkpoint " + dir.string() + " was written for config digest " + info.config_digest +
                          ", current config digest is " + std::string(expected_digest));
    }
    auto file = read_feature_file(dir / "params.haf1");
    if (file.ids.size() != info.n_parameters || file.ids.size() != store.size()) {
        throw FormatError("checkpoint " + dir.string() + " holds " + std::to_string(file.ids.size()) +
                          " parameters, model has " + std::to_string(store.size()));
    }
    for (std::size_t i = 0; i < file.ids.size(); ++i) {
        if (!store.contains(file.ids[i])) {
            throw FormatError("checkpoint parameter '" + file.ids[i] + "' does not exist in the model");
        }
        auto& p = store.get(file.ids[i]);
        auto t = file.records[i].to_tensor();
        if (t.shape() != p.tensor.shape()) {
            throw FormatError("checkpoint parameter '" + file.ids[i] + "' has shape " + shape_str(t.shape()) +
                              ", model expects " + shape_str(p.tensor.shape()));
        }
        std::copy(t.data().begin(), t.data().end(), p.tensor.mutable_data().begin());
    }
}

} // namespace hieract
