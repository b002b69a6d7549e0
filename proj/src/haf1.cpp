#include "hieract/haf1.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "hieract/errors.hpp"

namespace hieract {

namespace {

constexpr char kMagic[4] = {'H', 'A', 'F', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

    std::uint32_t u32(const char* what) {
        if (bytes_.size() - pos_ < 4) {
            throw FormatError(std::string("HAF1: truncated while reading ") + what + " at byte " + std::to_string(pos_));
        }
        std::uint32_t v = static_cast<std::uint32_t>(bytes_[pos_]) | (static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8) |
                          (static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16) |
                          (static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24);
        pos_ += 4;
        return v;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_;
};

} // namespace

Haf1Record Haf1Record::from_tensor(const Tensor& t) {
    Haf1Record r;
    for (auto e : t.shape()) {
        r.extents.push_back(static_cast<std::uint32_t>(e));
    }
    r.values = t.to_vector();
    return r;
}

Tensor Haf1Record::to_tensor() const {
    Shape shape(extents.begin(), extents.end());
    return Tensor::from_vector(values, std::move(shape));
}

std::vector<std::uint8_t> encode_haf1(std::span<const Haf1Record> records) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(records.size()));
    for (const auto& rec : records) {
        std::size_t n = 1;
        for (auto e : rec.extents) {
            n *= e;
        }
        if (n != rec.values.size()) {
            throw DimensionError("HAF1: record extents hold " + std::to_string(n) + " values but " +
                                 std::to_string(rec.values.size()) + " were given");
        }
        put_u32(out, static_cast<std::uint32_t>(rec.extents.size()));
        for (auto e : rec.extents) {
            put_u32(out, e);
        }
        for (float v : rec.values) {
            put_u32(out, std::bit_cast<std::uint32_t>(v));
        }
    }
    return out;
}

std::vector<Haf1Record> decode_haf1(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw FormatError("HAF1: bad magic (expected \"HAF1\")");
    }
    Reader in(bytes, 4);
    std::uint32_t count = in.u32("record count");
    std::vector<Haf1Record> records;
    records.reserve(std::min<std::size_t>(count, 1u << 16));
    for (std::uint32_t r = 0; r < count; ++r) {
        Haf1Record rec;
        std::uint32_t rank = in.u32("rank");
        if (static_cast<std::size_t>(rank) * 4 > in.remaining()) {
            throw FormatError("HAF1: record " + std::to_string(r) + " declares rank " + std::to_string(rank) +
                              " beyond end of file");
        }
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            std::uint32_t e = in.u32("extent");
            if (e == 0) {
                throw FormatError("HAF1: record " + std::to_string(r) + " has a zero extent");
            }
            rec.extents.push_back(e);
            n *= e;
        }
        if (n > in.remaining() / 4) {
            throw FormatError("HAF1: record " + std::to_string(r) + " declares " + std::to_string(n) +
                              " floats but only " + std::to_string(in.remaining() / 4) + " remain");
        }
        rec.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            rec.values[i] = std::bit_cast<float>(in.u32("payload"));
        }
        records.push_back(std::move(rec));
    }
    if (in.remaining() != 0) {
        throw FormatError("HAF1: " + std::to_string(in.remaining()) + " trailing bytes after " + std::to_string(count) +
                          " records");
    }
    return records;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_haf1(const std::filesystem::path& path, std::span<const Haf1Record> records) {
    write_bytes(path, encode_haf1(records));
}

std::vector<Haf1Record> read_haf1(const std::filesystem::path& path) {
    try {
        return decode_haf1(read_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".ids";
    return p;
}

void write_id_sidecar(const std::filesystem::path& path, std::span<const std::string> ids) {
    std::string text;
    for (const auto& id : ids) {
        if (id.empty() || id.find('\n') != std::string::npos || id.find('\r') != std::string::npos) {
            throw FormatError("id sidecar: ids must be non-empty single lines, got '" + id + "'");
        }
        text += id;
        text += '\n';
    }
    write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::string> read_id_sidecar(const std::filesystem::path& path) {
    auto bytes = read_bytes(path);
    std::vector<std::string> ids;
    std::string current;
    for (auto b : bytes) {
        if (b == '\n') {
            if (!current.empty() && current.back() == '\r') {
                current.pop_back();
            }
            ids.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(static_cast<char>(b));
        }
    }
    if (!current.empty()) {
        ids.push_back(std::move(current));
    }
    return ids;
}

void write_feature_file(const std::filesystem::path& path, const FeatureFile& file) {
    if (file.ids.size() != file.records.size()) {
        throw FormatError("feature file: " + std::to_string(file.ids.size()) + " ids for " +
                          std::to_string(file.records.size()) + " records");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : file.ids) {
        if (!seen.insert(id).second) {
            throw FormatError("feature file: duplicate id '" + id + "'");
        }
    }
    write_haf1(path, file.records);
    write_id_sidecar(sidecar_path(path), file.ids);
}

FeatureFile read_feature_file(const std::filesystem::path& path) {
    FeatureFile file;
    file.records = read_haf1(path);
    file.ids = read_id_sidecar(sidecar_path(path));
    if (file.ids.size() != file.records.size()) {
        throw FormatError(path.string() + ": sidecar lists " + std::to_string(file.ids.size()) + " ids for " +
                          std::to_string(file.records.size()) + " records");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : file.ids) {
        if (!seen.insert(id).second) {
            throw FormatError(path.string() + ": duplicate id '" + id + "' in sidecar");
        }
    }
    return file;
}

} // namespace hieract
