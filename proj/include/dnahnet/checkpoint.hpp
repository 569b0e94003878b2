#pragma once

// Binary container for named arrays:
//
//   "DNAHNET1"
//   u64 entry count
//   per entry: u32 name length, name bytes, u8 dtype (0 = f64, 1 = f32),
//              u32 rank, u64 extent[rank]
//   payloads, row-major little-endian, in manifest order
//
// Readers reject a wrong magic, truncated payloads and trailing bytes.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dnahnet/tensor.hpp"

namespace dnahnet::ad {

enum class DType : std::uint8_t { f64 = 0, f32 = 1 };

struct ArrayEntry {
    std::string name;
    DType dtype = DType::f64;
    Shape shape;
    std::vector<double> values;
};

inline constexpr char kCheckpointMagic[8] = {'D', 'N', 'A', 'H', 'N', 'E', 'T', '1'};

void write_arrays(std::ostream& out, const std::vector<ArrayEntry>& entries);
std::vector<ArrayEntry> read_arrays(std::istream& in);

// Written to a sibling temporary and renamed into place.
void save_arrays(const std::filesystem::path& path, const std::vector<ArrayEntry>& entries);
std::vector<ArrayEntry> load_arrays(const std::filesystem::path& path);

}  // namespace dnahnet::ad
