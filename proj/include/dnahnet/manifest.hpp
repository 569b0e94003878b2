#pragma once

// Provenance record written next to every output.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace dnahnet {

inline constexpr std::string_view kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
    std::string subcommand;
    std::string config;  // resolved settings text, defaults included
    std::map<std::string, std::string> arguments;
    std::map<std::string, std::string> inputs;   // path -> sha256
    std::map<std::string, std::string> outputs;  // path -> sha256
    std::uint64_t seed = 0;
    std::string precision = "f64";
    std::string tool_version{kToolVersion};
    std::string started;  // ISO-8601 UTC
    std::string finished;

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);
    std::string to_json() const;
};

std::string utc_timestamp();
// <output>.manifest.json
std::filesystem::path manifest_path_for(const std::filesystem::path& output);
void write_manifest(const std::filesystem::path& path, RunManifest manifest);

}  // namespace dnahnet
