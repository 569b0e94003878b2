#include "dnahnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dnahnet/errors.hpp"

namespace dnahnet::ad {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
        throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
    }
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

constexpr std::uint32_t kMaxName = 4096;
constexpr std::uint32_t kMaxRank = 8;

}  // namespace

void write_arrays(std::ostream& out, const std::vector<ArrayEntry>& entries) {
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_le<std::uint64_t>(out, entries.size());
    for (const auto& e : entries) {
        if (shape_size(e.shape) != e.values.size()) {
            throw CheckpointError("entry " + e.name + " has inconsistent shape");
        }
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
        for (auto x : e.shape) put_le<std::uint64_t>(out, x);
    }
    for (const auto& e : entries) {
        for (double v : e.values) {
            if (e.dtype == DType::f64) {
                put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
            } else {
                put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
            }
        }
    }
    if (!out) throw CheckpointError("failed writing checkpoint");
}

std::vector<ArrayEntry> read_arrays(std::istream& in) {
    char magic[sizeof(kCheckpointMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw CheckpointError("not a DNAHNET1 checkpoint (bad magic)");
    }
    const auto count = get_le<std::uint64_t>(in, "entry count");
    if (count > (1u << 24)) throw CheckpointError("implausible entry count");
    std::vector<ArrayEntry> entries(count);
    for (auto& e : entries) {
        const auto len = get_le<std::uint32_t>(in, "name length");
        if (len > kMaxName) throw CheckpointError("implausible entry name length");
        e.name.resize(len);
        if (!in.read(e.name.data(), len)) throw CheckpointError("truncated checkpoint in entry name");
        const auto tag = get_le<std::uint8_t>(in, "dtype");
        if (tag > 1) throw CheckpointError("unknown dtype tag in entry " + e.name);
        e.dtype = static_cast<DType>(tag);
        const auto rank = get_le<std::uint32_t>(in, "rank");
        if (rank > kMaxRank) throw CheckpointError("implausible rank in entry " + e.name);
        e.shape.resize(rank);
        for (auto& x : e.shape) x = get_le<std::uint64_t>(in, "extent");
        if (shape_size(e.shape) > (std::size_t{1} << 32)) throw CheckpointError("implausible extents in " + e.name);
    }
    for (auto& e : entries) {
        const std::size_t n = shape_size(e.shape);
        e.values.resize(n);
        for (auto& v : e.values) {
            if (e.dtype == DType::f64) {
                v = std::bit_cast<double>(get_le<std::uint64_t>(in, "payload"));
            } else {
                v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in, "payload")));
            }
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw CheckpointError("trailing bytes after checkpoint payloads");
    }
    return entries;
}

void save_arrays(const std::filesystem::path& path, const std::vector<ArrayEntry>& entries) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
        write_arrays(out, entries);
        out.flush();
        if (!out) throw CheckpointError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<ArrayEntry> load_arrays(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    return read_arrays(in);
}

}  // namespace dnahnet::ad
