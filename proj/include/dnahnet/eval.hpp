#pragma once

// Zero-shot scoring pipelines and their metrics.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnahnet/hnet.hpp"
#include "dnahnet/seqdata.hpp"

namespace dnahnet::eval {

struct Skipped {
    std::string id;
    std::string reason;
};

struct ScoredVariant {
    seq::VariantRecord variant;
    double score = 0.0;  // loglik(variant) - loglik(reference)
};

struct VepResult {
    std::vector<ScoredVariant> scored;
    std::vector<Skipped> skipped;
};

// References are looked up by record id == gene_id. Records with a missing
// reference or a reference mismatch are skipped, not fatal.
VepResult vep_score(const LikelihoodModel& model, std::span<const seq::NucleotideSequence> references,
                    std::span<const seq::VariantRecord> variants);

// Pearson correlation of average ranks. DegenerateError when either side is
// constant or fewer than 2 points are given.
double spearman(std::span<const double> xs, std::span<const double> ys);
std::vector<double> average_ranks(std::span<const double> xs);

struct GeneScore {
    std::string gene_id;
    double score = 0.0;  // loglik(wildtype) - loglik(knockout)
    std::optional<bool> essential;
};

struct EssentialityResult {
    std::vector<GeneScore> scored;
    std::vector<Skipped> skipped;
};

// Only coding annotations are scored; the rest are ignored. Genomes shorter
// than the window are scored whole.
EssentialityResult essentiality_scores(const LikelihoodModel& model, std::span<const seq::NucleotideSequence> genomes,
                                       std::span<const seq::GeneAnnotation> genes,
                                       std::size_t window = seq::kDefaultWindow);

// (wins + ties/2) / (positives * negatives). DegenerateError when a class is
// absent.
double auroc(std::span<const double> scores, const std::vector<bool>& labels);

// exp of the token-weighted mean NLL over all sequences of length >= 2.
double eval_perplexity(const LikelihoodModel& model, std::span<const std::vector<seq::Code>> corpus);

struct Count {
    std::size_t numerator = 0;
    std::size_t denominator = 0;
    double rate() const;  // NaN when the denominator is 0
};

struct BoundaryStats {
    std::size_t stage = 1;  // 1-based
    Count global;
    std::map<seq::Region, Count> regions;
    std::array<Count, 3> phases;  // codon positions 1..3, coding annotations only
    std::size_t uncovered = 0;    // decisions at positions no annotation covers
};

// Boundary decisions of one window: per stage, b over that stage's input and
// the stage-input positions that opened each chunk.
struct WindowDecisions {
    seq::Origin origin;  // genome id and start of the window's first nucleotide
    std::vector<std::vector<std::uint8_t>> b;
    std::vector<std::vector<std::size_t>> boundaries;
};

WindowDecisions decisions_of(const ForwardTrace& trace, const seq::Origin& origin);

// A decision at a stage-s position is attributed to the nucleotide that
// opened it, following the chunk openers of all outer stages.
std::vector<BoundaryStats> boundary_stats(std::span<const WindowDecisions> windows,
                                          std::span<const seq::GeneAnnotation> annotations);
std::vector<BoundaryStats> boundary_stats(const HNetModel& model, std::span<const seq::NucleotideSequence> windows,
                                          std::span<const seq::GeneAnnotation> annotations);

inline constexpr const char* kBoundaryStatsHeader = "stage,feature_class,feature,rate,numerator,denominator";
std::string format_boundary_stats(std::span<const BoundaryStats> stats);
// Plain-text table with one column per stage.
std::string render_boundary_table(std::span<const BoundaryStats> stats);

inline constexpr const char* kBoundaryDumpHeader = "seq_id,stage,position,p,b";
// 1-based positions over each stage's input.
std::string format_boundary_dump(const std::string& seq_id, const ForwardTrace& trace);

inline constexpr const char* kVepHeader = "gene_id,position,ref,alt,score,fitness";
inline constexpr const char* kEssentialityHeader = "gene_id,score,essential";
std::string format_vep(const VepResult& result);
std::string format_essentiality(const EssentialityResult& result);

}  // namespace dnahnet::eval
