#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "dnahnet/errors.hpp"
#include "dnahnet/random.hpp"
#include "dnahnet/seqdata.hpp"
#include "doctest.h"

using namespace dnahnet;
using namespace dnahnet::seq;

namespace {

const std::string kGolden = std::string(DNAHNET_SOURCE_DIR) + "/data/golden/";

NucleotideSequence random_genome(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    NucleotideSequence g;
    g.id = "toy";
    for (std::size_t i = 0; i < n; ++i) g.codes.push_back(static_cast<Code>(rng() >> 62));
    return g;
}

std::size_t hamming(const std::vector<Code>& a, const std::vector<Code>& b) {
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

GeneAnnotation gene(std::size_t start, std::size_t end, Strand strand = Strand::forward) {
    GeneAnnotation g;
    g.gene_id = "g";
    g.genome_id = "toy";
    g.start = start;
    g.end = end;
    g.strand = strand;
    return g;
}

}  // namespace

TEST_CASE("encode_sequence") {
    CHECK(encode_sequence("ACGT").codes == std::vector<Code>{0, 1, 2, 3});
    CHECK(encode_sequence("acgt").codes == std::vector<Code>{0, 1, 2, 3});
    try {
        encode_sequence("ACNT");
        FAIL("expected AmbiguityError");
    } catch (const AmbiguityError& e) {
        CHECK(e.positions() == std::vector<std::size_t>{2});
    }
    CHECK_THROWS(encode_sequence(""));

    auto r1 = encode_sequence("ANNNT", {AmbiguityPolicy::randomize, 5});
    auto r2 = encode_sequence("ANNNT", {AmbiguityPolicy::randomize, 5});
    CHECK(r1.codes == r2.codes);
    CHECK(r1.codes.front() == 0);
    CHECK(r1.codes.back() == 3);
    for (Code c : r1.codes) CHECK(c < 4);
}

TEST_CASE("encode/decode is a bijection on ACGT strings") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::string s;
        const std::size_t n = 1 + rng() % 200;
        for (std::size_t i = 0; i < n; ++i) s += kAlphabet[rng() >> 62];
        CHECK(decode(encode_sequence(s).codes) == s);
    }
    CHECK(decode(reverse_complement(encode_sequence("AACGTT").codes)) == "AACGTT");
    CHECK(decode(reverse_complement(encode_sequence("AAGC").codes)) == "GCTT");
}

TEST_CASE("window_genome") {
    auto lengths = [](std::size_t n, std::size_t w) {
        std::vector<std::size_t> out;
        for (const auto& s : window_genome(random_genome(n, 3), w)) out.push_back(s.size());
        return out;
    };
    CHECK(lengths(20000, 8192) == std::vector<std::size_t>{8192, 8192, 3616});
    CHECK(lengths(5, 8192) == std::vector<std::size_t>{5});

    auto single = window_genome(random_genome(8192, 3));
    REQUIRE(single.size() == 1);
    CHECK(single[0].origin->start == 0);

    auto genome = random_genome(1001, 9);
    std::vector<Code> joined;
    std::size_t expected_offset = 0;
    for (const auto& w : window_genome(genome, 97)) {
        CHECK(w.origin->start == expected_offset);
        CHECK(w.origin->genome_id == "toy");
        expected_offset += w.size();
        joined.insert(joined.end(), w.codes.begin(), w.codes.end());
    }
    CHECK(joined == genome.codes);
}

TEST_CASE("centered_window") {
    auto genome = random_genome(10000, 4);
    auto span = [&](std::size_t s, std::size_t e) {
        auto w = centered_window(genome, gene(s, e), 2000);
        CHECK(w.size() == 2000);
        return std::pair{w.origin->start, w.origin->start + w.size()};
    };
    CHECK(span(4000, 4600) == std::pair<std::size_t, std::size_t>{3300, 5300});
    CHECK(span(50, 151) == std::pair<std::size_t, std::size_t>{0, 2000});
    CHECK(span(9900, 10000) == std::pair<std::size_t, std::size_t>{8000, 10000});
    CHECK_THROWS_AS(centered_window(random_genome(1000, 1), gene(10, 100), 2000), WindowError);
}

TEST_CASE("apply_variant") {
    auto ref = encode_sequence("AAAA");
    VariantRecord v{"g", 1, 0, 1, 0.0};
    auto mutated = apply_variant(ref, v);
    CHECK(mutated.text() == "ACAA");
    CHECK(apply_variant(mutated, VariantRecord{"g", 1, 1, 0, 0.0}).codes == ref.codes);
    CHECK_THROWS_AS(apply_variant(ref, VariantRecord{"g", 1, 2, 1, 0.0}), RefMismatchError);

    auto genome = random_genome(300, 8);
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        const std::size_t pos = rng() % genome.size();
        const Code alt = static_cast<Code>((genome.codes[pos] + 1 + rng() % 3) % 4);
        auto out = apply_variant(genome, {"g", pos, genome.codes[pos], alt, 0.0});
        CHECK(out.size() == genome.size());
        CHECK(hamming(out.codes, genome.codes) == 1);
    }
}

TEST_CASE("knockout on a forward-strand gene") {
    auto genome = random_genome(10000, 5);
    auto ko = make_knockout(genome, gene(1000, 1600));
    CHECK(ko.replaced_begin == 1015);
    CHECK(ko.replaced_end == 1030);
    REQUIRE(ko.knockout.size() == ko.wildtype.size());
    CHECK(ko.wildtype.codes == centered_window(genome, gene(1000, 1600)).codes);
    const std::size_t off = ko.replaced_begin - ko.wildtype.origin->start;
    CHECK(decode(std::span(ko.knockout.codes).subspan(off, 15)) == "TAATAATAATAGTGA");
    CHECK(hamming(ko.knockout.codes, ko.wildtype.codes) <= 15);
    for (std::size_t i = 0; i < ko.wildtype.size(); ++i) {
        if (i < off || i >= off + 15) CHECK(ko.knockout.codes[i] == ko.wildtype.codes[i]);
    }
}

TEST_CASE("knockout on hand-built 60-nt toy genomes") {
    const std::string text = "ACGTTGCAACGGATCCTAGCATGCAAGTCGATTCAGGCTAACGTTAGCCATGGATCCGAT";
    REQUIRE(text.size() == 60);
    auto genome = encode_sequence(text, {}, "toy");

    // Forward gene [5, 50): cassette occupies [20, 35) verbatim.
    auto fwd = make_knockout(genome, gene(5, 50), 60);
    CHECK(fwd.wildtype.text() == text);
    CHECK(fwd.knockout.text() == text.substr(0, 20) + "TAATAATAATAGTGA" + text.substr(35));

    // Reverse gene [10, 50): its first base is genome position 49, so gene
    // offsets 15..29 are genome positions 34 down to 20, and the genome strand
    // carries the reverse complement of the cassette there.
    auto rev = make_knockout(genome, gene(10, 50, Strand::reverse), 60);
    CHECK(rev.replaced_begin == 20);
    CHECK(rev.replaced_end == 35);
    CHECK(rev.knockout.text() == text.substr(0, 20) + "TCACTATTATTATTA" + text.substr(35));

    CHECK_THROWS_AS(make_knockout(genome, gene(10, 39), 60), GeneTooShortError);
    CHECK_THROWS_AS(make_knockout(genome, gene(10, 50), 100), WindowError);
}

TEST_CASE("coding-length validation reports without rejecting") {
    std::vector<GeneAnnotation> genes = {gene(0, 30), gene(0, 31)};
    auto issues = validate_annotations(genes);
    CHECK(issues.size() == 1);
}

TEST_CASE("codon source frequencies and entropies") {
    auto corpus = synth_codon_corpus(1000, 999, 12);
    std::array<std::array<double, 4>, 3> counts{};
    std::array<double, 3> totals{};
    std::size_t n = 0;
    for (const auto& s : corpus) {
        CHECK(s.size() == 999);
        for (std::size_t i = 0; i < s.size(); ++i) {
            counts[i % 3][s.codes[i]] += 1;
            totals[i % 3] += 1;
            ++n;
        }
    }
    CHECK(n > 990000);
    for (std::size_t ph = 0; ph < 3; ++ph) {
        for (std::size_t b = 0; b < 4; ++b) {
            CHECK(std::abs(counts[ph][b] / totals[ph] - CodonSource::probabilities[ph][b]) < 0.01);
        }
    }

    // Entropies recomputed from the tables.
    double h_phase = 0;
    std::array<double, 4> marg{};
    for (const auto& row : CodonSource::probabilities) {
        for (std::size_t b = 0; b < 4; ++b) {
            h_phase -= row[b] * std::log(row[b]) / 3.0;
            marg[b] += row[b] / 3.0;
        }
    }
    double h_uni = 0;
    for (double p : marg) h_uni -= p * std::log(p);
    CHECK(CodonSource::phase_conditional_entropy() == doctest::Approx(h_phase).epsilon(1e-14));
    CHECK(CodonSource::unigram_entropy() == doctest::Approx(h_uni).epsilon(1e-14));
    CHECK(h_uni > h_phase);

    auto again = synth_codon_corpus(1000, 999, 12);
    for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(again[i].codes == corpus[i].codes);
    CHECK(synth_codon_corpus(1, 99, 13)[0].codes != corpus[0].codes);
    CHECK_THROWS(synth_codon_corpus(1, 100, 1));
}

TEST_CASE("golden FASTA parses and re-serializes bit-exactly") {
    const auto bytes = read_text_file(kGolden + "two_records.fasta");
    auto recs = read_fasta(kGolden + "two_records.fasta");
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].id == "contig_1");
    CHECK(recs[0].size() == 150);
    CHECK(recs[1].size() == 73);
    CHECK(format_fasta(recs, 60) == bytes);

    auto described = parse_fasta(">chr1 some description\nACG\nT\n>chr2\nGG\n");
    CHECK(described[0].id == "chr1");
    CHECK(described[0].text() == "ACGT");
    CHECK_THROWS_AS(parse_fasta("ACGT\n"), ParseError);
    try {
        parse_fasta(">a\nACGT\nACXT\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("golden annotation and variant tables round-trip") {
    const auto ann_bytes = read_text_file(kGolden + "annotations.tsv");
    auto genes = read_annotations(kGolden + "annotations.tsv");
    REQUIRE(genes.size() == 3);
    CHECK(genes[1].strand == Strand::reverse);
    CHECK(genes[1].essential == false);
    CHECK_FALSE(genes[2].essential.has_value());
    CHECK(genes[2].region == Region::promoter);
    CHECK(format_annotations(genes) == ann_bytes);

    const auto var_bytes = read_text_file(kGolden + "variants.tsv");
    auto variants = read_variants(kGolden + "variants.tsv");
    REQUIRE(variants.size() == 3);
    CHECK(variants[0].fitness == -0.25);
    CHECK(format_variants(variants) == var_bytes);
    CHECK(parse_variants(format_variants(variants)) == variants);
}

TEST_CASE("table parsers reject malformed rows with a line number") {
    const std::string header = "gene_id\tgenome_id\tstart\tend\tstrand\tregion\tessential\n";
    auto line_of = [](auto&& fn) -> std::size_t {
        try {
            fn();
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of([&] { parse_annotations(header + "# note\ng\tc\t50\t50\t+\tcoding\t1\n"); }) == 3);
    CHECK(line_of([&] { parse_annotations(header + "g\tc\t5\t50\t*\tcoding\t1\n"); }) == 2);
    CHECK(line_of([&] { parse_annotations(header + "g\tc\t5\t50\t+\texon\t1\n"); }) == 2);
    CHECK(line_of([&] { parse_annotations(header + "g\tc\t5\t50\t+\tcoding\n"); }) == 2);
    CHECK(line_of([&] { parse_annotations("gene\tstart\n"); }) == 1);

    const std::string vh = "gene_id\tposition\tref\talt\tfitness\n";
    CHECK(line_of([&] { parse_variants(vh + "g\t1\tA\tA\t0.5\n"); }) == 2);
    CHECK(line_of([&] { parse_variants(vh + "g\t1\tA\tC\tabc\n"); }) == 2);
    CHECK(line_of([&] { parse_variants(vh + "g\t-1\tA\tC\t0.1\n"); }) == 2);
    CHECK_THROWS_AS(read_variants(kGolden + "missing.tsv"), Error);
}
