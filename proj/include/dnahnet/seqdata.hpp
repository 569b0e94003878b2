#pragma once

// Nucleotide sequences, genome annotations and variant tables.
//
// Alphabet indices are fixed: A=0, C=1, G=2, T=3. All genome coordinates are
// 0-based; intervals are half-open.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dnahnet::seq {

using Code = std::uint8_t;

inline constexpr std::string_view kAlphabet = "ACGT";
inline constexpr std::string_view kStopCassette = "TAATAATAATAGTGA";
// Cassette starts this many nucleotides after the last base of the start codon.
inline constexpr std::size_t kKnockoutOffset = 12;
inline constexpr std::size_t kDefaultWindow = 8192;

enum class Strand : char { forward = '+', reverse = '-' };

struct Origin {
    std::string genome_id;
    std::size_t start = 0;
    Strand strand = Strand::forward;

    bool operator==(const Origin&) const = default;
};

struct NucleotideSequence {
    std::string id;
    std::vector<Code> codes;
    std::optional<Origin> origin;

    std::size_t size() const noexcept { return codes.size(); }
    std::string text() const;
};

enum class AmbiguityPolicy { reject, randomize };

struct EncodeOptions {
    AmbiguityPolicy policy = AmbiguityPolicy::reject;
    std::uint64_t seed = 0;
};

// Lowercase is accepted. Throws AmbiguityError (reject) for non-ACGT symbols;
// with randomize each offender becomes a seeded uniform base.
NucleotideSequence encode_sequence(std::string_view text, const EncodeOptions& options = {},
                                   std::string id = {});
std::string decode(std::span<const Code> codes);
int base_index(char c) noexcept;  // -1 when not ACGT/acgt
std::vector<Code> reverse_complement(std::span<const Code> codes);

enum class Region { promoter, start_codon, coding, stop_codon, intergenic, other };
inline constexpr std::array<Region, 6> kRegions = {Region::promoter,   Region::start_codon,
                                                   Region::coding,     Region::stop_codon,
                                                   Region::intergenic, Region::other};
std::string_view region_name(Region r);
std::optional<Region> parse_region(std::string_view s);

struct GeneAnnotation {
    std::string gene_id;
    std::string genome_id;
    std::size_t start = 0;  // inclusive
    std::size_t end = 0;    // exclusive
    Strand strand = Strand::forward;
    Region region = Region::coding;
    std::optional<bool> essential;

    std::size_t length() const noexcept { return end - start; }
    bool operator==(const GeneAnnotation&) const = default;
};

struct VariantRecord {
    std::string gene_id;
    std::size_t position = 0;
    Code ref = 0;
    Code alt = 0;
    double fitness = 0.0;

    bool operator==(const VariantRecord&) const = default;
};

// Consecutive non-overlapping windows; the last one holds the remainder.
std::vector<NucleotideSequence> window_genome(const NucleotideSequence& genome,
                                              std::size_t window = kDefaultWindow);

// Window of exactly `window` nucleotides centred on the gene midpoint and
// shifted (never padded) to stay inside the genome.
NucleotideSequence centered_window(const NucleotideSequence& genome, const GeneAnnotation& gene,
                                   std::size_t window = kDefaultWindow);

NucleotideSequence apply_variant(const NucleotideSequence& reference, const VariantRecord& variant);

struct Knockout {
    NucleotideSequence wildtype;
    NucleotideSequence knockout;
    std::size_t replaced_begin = 0;  // genome coordinates of the replaced span
    std::size_t replaced_end = 0;
};

// Replaces 15 nt with the stop cassette 12 nt downstream of the start codon,
// in gene orientation (reverse-strand genes are edited on the reverse
// complement and mapped back).
Knockout make_knockout(const NucleotideSequence& genome, const GeneAnnotation& gene,
                       std::size_t window = kDefaultWindow);

// Coding-frame problems (length not divisible by 3), reported but not rejected.
std::vector<std::string> validate_annotations(std::span<const GeneAnnotation> genes);

// 3-periodic source: position-in-codon dependent emission tables, every
// sequence starts at codon position 1.
struct CodonSource {
    // probabilities[phase][base]
    static constexpr std::array<std::array<double, 4>, 3> probabilities = {{
        {0.60, 0.10, 0.20, 0.10},
        {0.10, 0.15, 0.10, 0.65},
        {0.15, 0.55, 0.15, 0.15},
    }};
    static std::array<double, 4> marginal();
    static double unigram_entropy();          // nats
    static double phase_conditional_entropy();  // nats
};

std::vector<NucleotideSequence> synth_codon_corpus(std::size_t num_sequences, std::size_t length,
                                                   std::uint64_t seed);

// Parsers keep file order and report ParseError with a line number.
std::vector<NucleotideSequence> read_fasta(const std::filesystem::path& path,
                                           const EncodeOptions& options = {});
std::vector<NucleotideSequence> parse_fasta(std::string_view text, const EncodeOptions& options = {},
                                            std::string_view source = "<fasta>");
std::string format_fasta(std::span<const NucleotideSequence> records, std::size_t line_width = 80);

std::vector<GeneAnnotation> read_annotations(const std::filesystem::path& path);
std::vector<GeneAnnotation> parse_annotations(std::string_view text, std::string_view source = "<annotations>");
std::string format_annotations(std::span<const GeneAnnotation> genes);

std::vector<VariantRecord> read_variants(const std::filesystem::path& path);
std::vector<VariantRecord> parse_variants(std::string_view text, std::string_view source = "<variants>");
std::string format_variants(std::span<const VariantRecord> variants);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace dnahnet::seq
