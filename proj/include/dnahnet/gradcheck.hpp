#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "dnahnet/tensor.hpp"

namespace dnahnet::ad {

struct GradCheckOptions {
    double eps = 1e-5;
    // Coordinates sampled per tensor; tensors at most this large are checked exhaustively.
    std::size_t coords_per_tensor = 48;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    std::string worst;  // "tensor#index" of the largest error
};

// Compares reverse-mode gradients of the scalar f against central differences.
// Error per coordinate is |analytic - numeric| / max(1, |numeric|). The inputs
// are restored on return and their gradients hold the analytic values.
GradCheckResult finite_diff_check(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                                  const GradCheckOptions& options = {});

}  // namespace dnahnet::ad
