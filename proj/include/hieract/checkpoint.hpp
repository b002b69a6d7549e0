#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "hieract/parameter.hpp"

namespace hieract {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
    int version = kCheckpointVersion;
    std::string config_digest;
    std::size_t n_parameters = 0;
};

/// Writes dir/params.haf1 (one record per parameter, store order),
/// dir/params.haf1.ids (parameter names) and dir/manifest.json.
void save_checkpoint(const std::filesystem::path& dir, const ParameterStore<float>& store,
                     std::string_view config_digest);

/// Throws FormatError for a damaged or incompatible container and
/// ConfigError when the stored digest differs from `expected_digest`.
void load_checkpoint(const std::filesystem::path& dir, ParameterStore<float>& store,
                     std::string_view expected_digest);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);

} // namespace hieract
