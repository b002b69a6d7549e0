#pragma once

// HAF1 feature/checkpoint container.
//
//   magic        4 bytes  "HAF1"
//   count        u32 LE   number of records
//   per record:
//     rank       u32 LE
//     extents    rank x u32 LE
//     payload    prod(extents) x IEEE-754 binary32 LE, row-major
//
// Record identifiers live in a UTF-8 sidecar next to the file ("<file>.ids"),
// one id per line, line i naming record i.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hieract/tensor.hpp"

namespace hieract {

struct Haf1Record {
    std::vector<std::uint32_t> extents;
    std::vector<float> values;

    static Haf1Record from_tensor(const Tensor& t);
    Tensor to_tensor() const;
};

std::vector<std::uint8_t> encode_haf1(std::span<const Haf1Record> records);
/// Throws FormatError on bad magic, truncation, zero extents or trailing bytes.
std::vector<Haf1Record> decode_haf1(std::span<const std::uint8_t> bytes);

void write_haf1(const std::filesystem::path& path, std::span<const Haf1Record> records);
std::vector<Haf1Record> read_haf1(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);
void write_id_sidecar(const std::filesystem::path& path, std::span<const std::string> ids);
std::vector<std::string> read_id_sidecar(const std::filesystem::path& path);

/// HAF1 file plus its id sidecar.
struct FeatureFile {
    std::vector<std::string> ids;
    std::vector<Haf1Record> records;
};

/// Writes `path` and `sidecar_path(path)`. Ids must be unique and newline-free.
void write_feature_file(const std::filesystem::path& path, const FeatureFile& file);
/// Reads both files and checks that id and record counts agree.
FeatureFile read_feature_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace hieract
