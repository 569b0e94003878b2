#pragma once

#include <string>
#include <vector>

#include "dnahnet/config.hpp"
#include "dnahnet/random.hpp"
#include "dnahnet/seqdata.hpp"

namespace dnahnet::testing {

// Small two-stage model for fast checks.
inline ModelConfig tiny_config(Confidence confidence = Confidence::ste, std::uint64_t seed = 1) {
    ModelConfig c;
    c.layout = R"(["m1", ["T1m1", ["T2"], "m1T1"], "m1"])";
    c.levels = {{8, 2, 0, 2.0}, {12, 2, 16, 1.5}, {16, 2, 24, 1.0}};
    c.targets = {2.0, 2.0};
    c.state_dim = 8;
    c.init_std = 0.5;
    c.init_seed = seed;
    c.confidence = confidence;
    c.context = 512;
    return c;
}

inline std::vector<seq::Code> random_codes(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<seq::Code> out(n);
    for (auto& c : out) c = static_cast<seq::Code>(rng() >> 62);
    return out;
}

}  // namespace dnahnet::testing
