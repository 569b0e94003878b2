#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dnahnet/checkpoint.hpp"
#include "dnahnet/errors.hpp"
#include "dnahnet/flops.hpp"
#include "dnahnet/hnet.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace dnahnet;
using namespace dnahnet::ad;
namespace fs = std::filesystem;

namespace {

const fs::path kGolden = fs::path(DNAHNET_SOURCE_DIR) / "data" / "golden";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("golden checkpoint re-serializes bit for bit") {
    const std::string bytes = slurp(kGolden / "tiny_model.ckpt");
    std::stringstream in(bytes);
    const auto entries = read_arrays(in);
    std::stringstream out;
    write_arrays(out, entries);
    CHECK(out.str() == bytes);
}

TEST_CASE("a freshly initialized model reproduces the golden checkpoint") {
    HNetModel model(testing::tiny_config(Confidence::ste, 1));
    std::stringstream out;
    write_arrays(out, model.export_parameters());
    CHECK(out.str() == slurp(kGolden / "tiny_model.ckpt"));

    auto loaded = load_model(kGolden / "tiny_model.ckpt");
    const auto codes = testing::random_codes(50, 2);
    const auto a = model.logits(codes), b = loaded->logits(codes);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end()));
}

TEST_CASE("golden model settings round-trip through the config text") {
    const std::string text = slurp(kGolden / "tiny_model.ckpt.cfg");
    CHECK(format_config(parse_config(text)) == text);
    CHECK(parse_config(text).model == testing::tiny_config(Confidence::ste, 1));
}

TEST_CASE("golden FLOP table regenerates exactly") {
    const auto toy = read_config(fs::path(DNAHNET_SOURCE_DIR) / "configs" / "toy.ini");
    const std::vector<double> lengths = {1024, 65536};
    CHECK(flops::format_flops(flops::flops_sweep(toy.model, lengths).hierarchical) ==
          slurp(kGolden / "flops_toy.csv"));
}

TEST_CASE("corrupted checkpoints are rejected") {
    const std::string bytes = slurp(kGolden / "tiny_model.ckpt");
    auto rejects = [](const std::string& b) {
        std::stringstream s(b);
        try {
            read_arrays(s);
        } catch (const CheckpointError&) {
            return true;
        }
        return false;
    };
    std::string version = bytes;
    version[7] = '9';
    CHECK(rejects(version));
    std::string magic = bytes;
    magic[0] = 'X';
    CHECK(rejects(magic));
    CHECK(rejects(bytes.substr(0, bytes.size() / 2)));
    CHECK(rejects(bytes.substr(0, 12)));
    CHECK(rejects(bytes + std::string(8, '\0')));
    // First entry's dtype byte sits after the count, name length and name.
    const std::uint32_t name_len = static_cast<std::uint8_t>(bytes[16]);
    std::string dtype = bytes;
    dtype[8 + 8 + 4 + name_len] = 7;
    CHECK(rejects(dtype));

    const auto path = fs::temp_directory_path() / "dnahnet_corrupt.ckpt";
    std::ofstream(path, std::ios::binary) << version;
    fs::copy_file(kGolden / "tiny_model.ckpt.cfg", fs::path(path.string() + ".cfg"),
                  fs::copy_options::overwrite_existing);
    CHECK_THROWS_AS(load_model(path), CheckpointError);
    fs::remove(path);
    fs::remove(path.string() + ".cfg");
}
