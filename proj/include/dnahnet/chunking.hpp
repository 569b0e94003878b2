#pragma once

// Dynamic chunking: boundary routing, hard downsampling, the smoothing
// recurrence over chunk vectors, upsampling and the ratio loss.
//
// Positions and chunk indices are 0-based here; dumps print them 1-based.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dnahnet/config.hpp"
#include "dnahnet/tensor.hpp"

namespace dnahnet::chunking {

using ad::Tensor;

inline constexpr double kThreshold = 0.5;

struct BoundaryDecision {
    std::vector<double> p;
    std::vector<std::uint8_t> b;
    std::size_t stage_index = 0;
};

struct ChunkedSequence {
    Tensor latents;                    // [L', D], rows of h at boundaries
    std::vector<std::size_t> chunk_map;  // c(t), length L
    std::vector<std::size_t> boundaries;  // positions t with b_t = 1
    Tensor boundary_probs;             // [L', 1], p at each boundary position
    std::size_t chunks() const { return boundaries.size(); }
};

// p_t = (1 - cos(h_t Wq, h_{t-1} Wk)) / 2 for t >= 1, p_0 = 1. Result is [L, 1].
Tensor route(const Tensor& h, const Tensor& wq, const Tensor& wk);

// b_t = p_t > threshold, b_0 = 1.
std::vector<std::uint8_t> discretize(std::span<const double> p, double threshold = kThreshold);

// p is the [L, 1] routing output; its boundary rows become boundary_probs.
ChunkedSequence downsample(const Tensor& h, std::span<const std::uint8_t> b, const Tensor& p);

// e_j = P_j * x_j + (1 - P_j) * e_{j-1}, e_{-1} = 0. P is [L', 1].
Tensor smooth(const Tensor& x, const Tensor& P);

// Row t = coeff_t * e[c(t)]. See Confidence for the meaning of coeff.
Tensor upsample(const Tensor& e, std::span<const std::size_t> chunk_map, const Tensor& p,
                std::span<const std::uint8_t> b, Confidence mode);

// (R/(R-1)) * ((R-1) F G + (1-F)(1-G)); F is a constant, G carries the gradient.
Tensor ratio_loss(double F, const Tensor& G, double R);
double ratio_loss_value(double F, double G, double R);

}  // namespace dnahnet::chunking
