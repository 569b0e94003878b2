#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dnahnet {

// Numeric CSV fields: 9 significant digits.
std::string fmt9(double value);

// Writes to a sibling temporary and renames it into place, so a failed run
// never leaves a partial file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace dnahnet
