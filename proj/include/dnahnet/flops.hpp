#pragma once

// Analytic forward-pass FLOP model and power-law fitting.
//
// Conventions: 2 FLOPs per multiply-add; dense, recurrent, feed-forward and
// head layers cost 2 x parameters x length; each attention layer adds
// 4 * len^2 * dim * kCausalFactor for scores and the weighted sum; routing
// costs 2 * (2 * dim^2) * len per stage. Embedding lookups, norms' divisions
// and the elementwise chunking steps are not counted.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnahnet/config.hpp"

namespace dnahnet::flops {

inline constexpr double kCausalFactor = 0.5;
inline constexpr double kTrainingMultiplier = 3.0;  // forward + backward

struct FlopReport {
    double length = 0;
    double enc = 0;      // all encoder stacks, each at its own length
    double main = 0;     // innermost stack and the width projections around it
    double dec = 0;      // all decoder stacks and the output head
    double routing = 0;  // boundary scoring
    double quadratic_subtotal = 0;  // attention score terms of the innermost stack
    double r_eff = 1;

    double total() const { return enc + main + dec + routing; }
    double per_token() const { return total() / length; }
};

// Stack lengths follow the targets, taken as realized ratios.
FlopReport flops_estimate(const ModelConfig& config, double length);
// Same, with explicit per-stage ratios (e.g. 1 / F measured from a trace).
FlopReport flops_estimate(const ModelConfig& config, double length, std::span<const double> ratios);

// Every layer of the config run at full length, without routing.
FlopReport plain_estimate(const ModelConfig& config, double length);

// Parameter count of one layer block as built by the model.
std::size_t block_parameters(const ModelConfig& config, std::size_t level, bool attention);

double training_flops(const ModelConfig& config, double length, double tokens);

struct Sweep {
    std::vector<FlopReport> hierarchical, plain;
    // Length beyond which the hierarchical config is cheaper per token; 0 when
    // it is cheaper at every length, nullopt when it never is.
    std::optional<double> crossing;
};

Sweep flops_sweep(const ModelConfig& config, std::span<const double> lengths);

inline constexpr const char* kFlopsHeader = "L,total_flops,per_token,enc,main,dec,routing,quadratic_subtotal,R_eff";
// Comment lines with the counting conventions, then the header and one row per report.
std::string format_flops(std::span<const FlopReport> reports);
std::string flop_conventions();

struct PowerLawFit {
    double A = 0;
    double alpha = 0;
    double residual = 0;  // RMS in log space
    std::size_t n_points = 0;
};

struct ScalingPoint {
    double compute = 0;
    double perplexity = 0;
};

// Least squares on (log C, log PPL): PPL = A * C^(-alpha).
PowerLawFit fit_power_law(std::span<const ScalingPoint> points);

inline constexpr const char* kFitHeader = "A,alpha,residual,n_points";
std::string format_fit(const PowerLawFit& fit);
// Reads `compute,perplexity` CSV with a header line.
std::vector<ScalingPoint> parse_scaling_points(std::string_view text, std::string_view source = "<points>");

}  // namespace dnahnet::flops
