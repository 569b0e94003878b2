#pragma once

// End-to-end fixtures on the synthetic codon corpus: a trainability run and
// a sweep over the rate-loss weight.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "dnahnet/config.hpp"
#include "dnahnet/train.hpp"

namespace dnahnet::synthbench {

inline constexpr double kMinPhaseSpread = 0.20;
inline constexpr double kCompressionTolerance = 0.20;

struct FixtureReport {
    double final_perplexity = 0;    // held-out synthetic corpus
    double unigram_perplexity = 0;  // phase-blind baseline of the generator
    double final_train_nll = 0;
    std::vector<double> F;          // per stage, held-out
    std::vector<double> targets;
    std::array<double, 3> phase_rates{};  // stage 1, codon positions 1..3
    std::size_t steps = 0;
    double seconds = 0;
    std::vector<train::StepMetrics> history;

    double phase_spread() const;
    bool beats_unigram() const { return final_perplexity < unigram_perplexity; }
    bool spread_ok() const { return phase_spread() >= kMinPhaseSpread; }
    // |1/F_s - R_s| / R_s <= tolerance for every stage.
    bool compression_ok() const;
};

using Progress = std::function<void(const train::StepMetrics&)>;

// Trains a fresh model from `config` on its synthetic corpus and evaluates it
// on the held-out split.
FixtureReport run_trainability_fixture(const RunConfig& config, const Progress& progress = {});

struct AblationRow {
    double alpha = 0;
    std::vector<double> F;
    double final_nll = 0;  // held-out
    double deviation = 0;  // sum over stages of |1/F_s - R_s| / R_s
};

// Rows sorted by deviation, smallest first.
std::vector<AblationRow> run_alpha_ablation(const RunConfig& config, const std::vector<double>& alphas,
                                            const Progress& progress = {});

std::string format_fixture_report(const FixtureReport& r);
inline constexpr const char* kAblationHeader = "alpha,deviation,final_nll,F_s1,F_s2";
std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace dnahnet::synthbench
