#include "dnahnet/manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <memory>

#include "dnahnet/errors.hpp"
#include "dnahnet/io.hpp"
#include "dnahnet/seqdata.hpp"
#include "json.hpp"

namespace dnahnet {

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::data, "cli", "sha256 failed");
    }
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(seq::read_text_file(path)); }

void RunManifest::add_input(const std::filesystem::path& path) { inputs[path.string()] = sha256_file(path); }
void RunManifest::add_output(const std::filesystem::path& path) { outputs[path.string()] = sha256_file(path); }

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["arguments"] = arguments;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["seed"] = seed;
    j["precision"] = precision;
    j["tool_version"] = tool_version;
    j["started"] = started;
    j["finished"] = finished;
    return j.dump(2) + "\n";
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
    auto p = output;
    p += ".manifest.json";
    return p;
}

void write_manifest(const std::filesystem::path& path, RunManifest manifest) {
    if (manifest.finished.empty()) manifest.finished = utc_timestamp();
    write_file_atomic(path, manifest.to_json());
}

}  // namespace dnahnet
