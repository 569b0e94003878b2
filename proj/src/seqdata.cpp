#include "dnahnet/seqdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dnahnet/errors.hpp"
#include "dnahnet/random.hpp"

namespace dnahnet::seq {

int base_index(char c) noexcept {
    switch (c) {
        case 'A': case 'a': return 0;
        case 'C': case 'c': return 1;
        case 'G': case 'g': return 2;
        case 'T': case 't': return 3;
        default: return -1;
    }
}

std::string NucleotideSequence::text() const { return decode(codes); }

NucleotideSequence encode_sequence(std::string_view text, const EncodeOptions& options, std::string id) {
    if (text.empty()) throw WindowError("cannot encode an empty sequence");
    NucleotideSequence out;
    out.id = std::move(id);
    out.codes.resize(text.size());
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const int b = base_index(text[i]);
        if (b < 0) {
            bad.push_back(i);
        } else {
            out.codes[i] = static_cast<Code>(b);
        }
    }
    if (!bad.empty()) {
        if (options.policy == AmbiguityPolicy::reject) throw AmbiguityError(std::move(bad));
        Rng rng(options.seed);
        for (auto i : bad) out.codes[i] = static_cast<Code>(rng() >> 62);
    }
    return out;
}

std::string decode(std::span<const Code> codes) {
    std::string s(codes.size(), 'N');
    for (std::size_t i = 0; i < codes.size(); ++i) s[i] = kAlphabet[codes[i] & 3];
    return s;
}

std::vector<Code> reverse_complement(std::span<const Code> codes) {
    std::vector<Code> out(codes.rbegin(), codes.rend());
    for (auto& c : out) c = static_cast<Code>(3 - c);
    return out;
}

std::string_view region_name(Region r) {
    switch (r) {
        case Region::promoter: return "promoter";
        case Region::start_codon: return "start_codon";
        case Region::coding: return "coding";
        case Region::stop_codon: return "stop_codon";
        case Region::intergenic: return "intergenic";
        case Region::other: return "other";
    }
    return "other";
}

std::optional<Region> parse_region(std::string_view s) {
    for (auto r : kRegions) {
        if (region_name(r) == s) return r;
    }
    return std::nullopt;
}

std::vector<NucleotideSequence> window_genome(const NucleotideSequence& genome, std::size_t window) {
    if (window == 0) throw WindowError("window length must be positive");
    std::vector<NucleotideSequence> out;
    const std::size_t base = genome.origin ? genome.origin->start : 0;
    for (std::size_t off = 0; off < genome.size(); off += window) {
        const std::size_t end = std::min(genome.size(), off + window);
        NucleotideSequence w;
        w.id = genome.id + ":" + std::to_string(base + off) + "-" + std::to_string(base + end);
        w.codes.assign(genome.codes.begin() + static_cast<std::ptrdiff_t>(off),
                       genome.codes.begin() + static_cast<std::ptrdiff_t>(end));
        w.origin = Origin{genome.origin ? genome.origin->genome_id : genome.id, base + off,
                          Strand::forward};
        out.push_back(std::move(w));
    }
    return out;
}

namespace {

std::size_t window_begin(std::size_t genome_len, const GeneAnnotation& gene, std::size_t window) {
    if (window == 0) throw WindowError("window length must be positive");
    if (gene.start >= gene.end || gene.end > genome_len) {
        throw WindowError("gene " + gene.gene_id + " [" + std::to_string(gene.start) + "," +
                          std::to_string(gene.end) + ") outside genome of length " +
                          std::to_string(genome_len));
    }
    if (genome_len < window) {
        throw WindowError("genome of length " + std::to_string(genome_len) + " shorter than window " +
                          std::to_string(window));
    }
    const std::size_t mid = (gene.start + gene.end) / 2;
    const std::size_t half = window / 2;
    const std::size_t begin = mid > half ? mid - half : 0;
    return std::min(begin, genome_len - window);
}

}  // namespace

NucleotideSequence centered_window(const NucleotideSequence& genome, const GeneAnnotation& gene,
                                   std::size_t window) {
    const std::size_t begin = window_begin(genome.size(), gene, window);
    NucleotideSequence w;
    w.id = gene.gene_id;
    w.codes.assign(genome.codes.begin() + static_cast<std::ptrdiff_t>(begin),
                   genome.codes.begin() + static_cast<std::ptrdiff_t>(begin + window));
    w.origin = Origin{gene.genome_id.empty() ? genome.id : gene.genome_id, begin, Strand::forward};
    return w;
}

NucleotideSequence apply_variant(const NucleotideSequence& reference, const VariantRecord& variant) {
    if (variant.position >= reference.size()) {
        throw RefMismatchError("variant position " + std::to_string(variant.position) +
                               " outside reference " + reference.id + " of length " +
                               std::to_string(reference.size()));
    }
    const Code found = reference.codes[variant.position];
    if (found != variant.ref) {
        throw RefMismatchError("reference " + reference.id + " has " + std::string(1, kAlphabet[found]) +
                               " at position " + std::to_string(variant.position) + ", variant expects " +
                               std::string(1, kAlphabet[variant.ref & 3]));
    }
    if (variant.alt > 3) throw RefMismatchError("alternate base out of range");
    NucleotideSequence out = reference;
    out.codes[variant.position] = variant.alt;
    return out;
}

Knockout make_knockout(const NucleotideSequence& genome, const GeneAnnotation& gene, std::size_t window) {
    const std::size_t span = kStopCassette.size();
    const std::size_t lead = 3 + kKnockoutOffset;
    if (gene.end <= gene.start || gene.length() < lead + span) {
        throw GeneTooShortError("gene " + gene.gene_id + " of length " + std::to_string(gene.length()) +
                                " cannot hold the stop cassette at offset " + std::to_string(lead));
    }
    Knockout ko;
    ko.wildtype = centered_window(genome, gene, window);
    const std::size_t wbegin = ko.wildtype.origin->start;
    const std::size_t wend = wbegin + ko.wildtype.size();

    // Gene-oriented offset o maps to genome coordinate start + o (forward) or
    // end - 1 - o (reverse).
    if (gene.strand == Strand::forward) {
        ko.replaced_begin = gene.start + lead;
    } else {
        ko.replaced_begin = gene.end - lead - span;
    }
    ko.replaced_end = ko.replaced_begin + span;
    if (ko.replaced_begin < wbegin || ko.replaced_end > wend) {
        throw WindowError("stop cassette for gene " + gene.gene_id + " falls outside its window");
    }

    const auto cassette = encode_sequence(kStopCassette);
    ko.knockout = ko.wildtype;
    ko.knockout.id = gene.gene_id + ":knockout";
    if (gene.strand == Strand::forward) {
        std::copy(cassette.codes.begin(), cassette.codes.end(),
                  ko.knockout.codes.begin() + static_cast<std::ptrdiff_t>(ko.replaced_begin - wbegin));
    } else {
        // Edit the reverse complement of the window in gene orientation, then map back.
        auto rc = reverse_complement(ko.knockout.codes);
        const std::size_t gene_start_rc = wend - gene.end;  // gene's first base in rc coordinates
        std::copy(cassette.codes.begin(), cassette.codes.end(),
                  rc.begin() + static_cast<std::ptrdiff_t>(gene_start_rc + lead));
        ko.knockout.codes = reverse_complement(rc);
    }
    return ko;
}

std::vector<std::string> validate_annotations(std::span<const GeneAnnotation> genes) {
    std::vector<std::string> issues;
    for (const auto& g : genes) {
        if (g.region == Region::coding && g.length() % 3 != 0) {
            issues.push_back("coding region " + g.gene_id + " has length " + std::to_string(g.length()) +
                             " not divisible by 3");
        }
    }
    return issues;
}

std::array<double, 4> CodonSource::marginal() {
    std::array<double, 4> m{};
    for (const auto& row : probabilities) {
        for (std::size_t b = 0; b < 4; ++b) m[b] += row[b] / 3.0;
    }
    return m;
}

double CodonSource::unigram_entropy() {
    double h = 0;
    for (double p : marginal()) h -= p > 0 ? p * std::log(p) : 0.0;
    return h;
}

double CodonSource::phase_conditional_entropy() {
    double h = 0;
    for (const auto& row : probabilities) {
        for (double p : row) h -= p > 0 ? p * std::log(p) / 3.0 : 0.0;
    }
    return h;
}

std::vector<NucleotideSequence> synth_codon_corpus(std::size_t num_sequences, std::size_t length,
                                                   std::uint64_t seed) {
    if (length == 0 || length % 3 != 0) throw WindowError("synthetic sequence length must be a positive multiple of 3");
    Rng rng(seed);
    std::vector<NucleotideSequence> out(num_sequences);
    for (std::size_t n = 0; n < num_sequences; ++n) {
        auto& s = out[n];
        s.id = "synth" + std::to_string(n);
        s.codes.resize(length);
        for (std::size_t t = 0; t < length; ++t) {
            s.codes[t] = static_cast<Code>(sample_index(rng, CodonSource::probabilities[t % 3]));
        }
        s.origin = Origin{"synthetic", 0, Strand::forward};
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    return lines;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t tab = line.find('\t', pos);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::size_t parse_size(std::string_view s, std::string_view source, std::size_t line, const char* field) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ParseError(std::string(source), line, std::string("invalid ") + field + " '" + std::string(s) + "'");
    }
    return v;
}

double parse_real(std::string_view s, std::string_view source, std::size_t line, const char* field) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
        throw ParseError(std::string(source), line, std::string("invalid ") + field + " '" + std::string(s) + "'");
    }
    return v;
}

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

// Returns data rows (line number, fields) after checking the header.
std::vector<std::pair<std::size_t, std::vector<std::string_view>>> parse_tsv(
    std::string_view text, std::string_view source, const std::vector<std::string_view>& header) {
    std::vector<std::pair<std::size_t, std::vector<std::string_view>>> rows;
    bool have_header = false;
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = lines[i];
        const std::size_t lineno = i + 1;
        if (line.empty() || line.front() == '#' || is_blank(line)) continue;
        auto fields = split_tabs(line);
        if (!have_header) {
            if (fields != header) {
                std::string want;
                for (auto h : header) want += (want.empty() ? "" : "\\t") + std::string(h);
                throw ParseError(std::string(source), lineno, "expected header '" + want + "'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != header.size()) {
            throw ParseError(std::string(source), lineno,
                             "expected " + std::to_string(header.size()) + " tab-separated fields, found " +
                                 std::to_string(fields.size()));
        }
        rows.emplace_back(lineno, std::move(fields));
    }
    if (!have_header) throw ParseError(std::string(source), lines.size(), "missing header line");
    return rows;
}

Code parse_base(std::string_view s, std::string_view source, std::size_t line, const char* field) {
    if (s.size() != 1 || base_index(s[0]) < 0) {
        throw ParseError(std::string(source), line, std::string("invalid ") + field + " base '" + std::string(s) + "'");
    }
    return static_cast<Code>(base_index(s[0]));
}

}  // namespace

std::vector<NucleotideSequence> parse_fasta(std::string_view text, const EncodeOptions& options,
                                            std::string_view source) {
    std::vector<NucleotideSequence> out;
    std::string body;
    std::string id;
    std::size_t header_line = 0;
    std::vector<std::pair<std::size_t, std::size_t>> line_starts;  // (body offset, line number)
    auto flush = [&](std::size_t lineno) {
        if (header_line == 0) return;
        if (body.empty()) throw ParseError(std::string(source), header_line, "record '" + id + "' has no sequence");
        try {
            out.push_back(encode_sequence(body, options, id));
        } catch (const AmbiguityError& e) {
            std::size_t where = header_line;
            for (const auto& [offset, l] : line_starts) {
                if (offset <= e.positions().front()) where = l;
            }
            throw ParseError(std::string(source), where, "record '" + id + "': " + e.what());
        }
        (void)lineno;
        body.clear();
        line_starts.clear();
    };
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = lines[i];
        const std::size_t lineno = i + 1;
        if (!line.empty() && line.front() == '>') {
            flush(lineno);
            std::string_view rest = line.substr(1);
            const std::size_t b = rest.find_first_not_of(" \t");
            if (b == std::string_view::npos) throw ParseError(std::string(source), lineno, "empty FASTA header");
            rest = rest.substr(b);
            id = std::string(rest.substr(0, rest.find_first_of(" \t")));
            header_line = lineno;
            continue;
        }
        if (is_blank(line)) continue;
        if (header_line == 0) throw ParseError(std::string(source), lineno, "sequence data before first '>' header");
        line_starts.emplace_back(body.size(), lineno);
        for (char c : line) {
            if (c == ' ' || c == '\t') continue;
            body.push_back(c);
        }
    }
    flush(lines.size());
    if (out.empty()) throw ParseError(std::string(source), lines.size(), "no FASTA records");
    return out;
}

std::vector<NucleotideSequence> read_fasta(const std::filesystem::path& path, const EncodeOptions& options) {
    return parse_fasta(read_text_file(path), options, path.string());
}

std::string format_fasta(std::span<const NucleotideSequence> records, std::size_t line_width) {
    std::string out;
    for (const auto& r : records) {
        out += '>';
        out += r.id;
        out += '\n';
        const std::string s = r.text();
        for (std::size_t i = 0; i < s.size(); i += line_width) {
            out.append(s, i, line_width);
            out += '\n';
        }
    }
    return out;
}

namespace {
const std::vector<std::string_view> kAnnotationHeader = {"gene_id", "genome_id", "start",    "end",
                                                         "strand",  "region",    "essential"};
const std::vector<std::string_view> kVariantHeader = {"gene_id", "position", "ref", "alt", "fitness"};
}  // namespace

std::vector<GeneAnnotation> parse_annotations(std::string_view text, std::string_view source) {
    std::vector<GeneAnnotation> out;
    for (auto& [lineno, f] : parse_tsv(text, source, kAnnotationHeader)) {
        GeneAnnotation g;
        g.gene_id = std::string(f[0]);
        g.genome_id = std::string(f[1]);
        if (g.gene_id.empty()) throw ParseError(std::string(source), lineno, "empty gene_id");
        g.start = parse_size(f[2], source, lineno, "start");
        g.end = parse_size(f[3], source, lineno, "end");
        if (g.end <= g.start) throw ParseError(std::string(source), lineno, "end must be greater than start");
        if (f[4] == "+") {
            g.strand = Strand::forward;
        } else if (f[4] == "-") {
            g.strand = Strand::reverse;
        } else {
            throw ParseError(std::string(source), lineno, "strand must be + or -");
        }
        auto region = parse_region(f[5]);
        if (!region) throw ParseError(std::string(source), lineno, "unknown region '" + std::string(f[5]) + "'");
        g.region = *region;
        const auto e = f[6];
        if (e == "1" || e == "true") {
            g.essential = true;
        } else if (e == "0" || e == "false") {
            g.essential = false;
        } else if (e == "NA" || e == "." || e.empty()) {
            g.essential = std::nullopt;
        } else {
            throw ParseError(std::string(source), lineno, "essential must be 1, 0 or NA");
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<GeneAnnotation> read_annotations(const std::filesystem::path& path) {
    return parse_annotations(read_text_file(path), path.string());
}

std::string format_annotations(std::span<const GeneAnnotation> genes) {
    std::string out = "gene_id\tgenome_id\tstart\tend\tstrand\tregion\tessential\n";
    for (const auto& g : genes) {
        out += g.gene_id + '\t' + g.genome_id + '\t' + std::to_string(g.start) + '\t' + std::to_string(g.end) +
               '\t' + static_cast<char>(g.strand) + '\t' + std::string(region_name(g.region)) + '\t' +
               (g.essential ? (*g.essential ? "1" : "0") : "NA") + '\n';
    }
    return out;
}

std::vector<VariantRecord> parse_variants(std::string_view text, std::string_view source) {
    std::vector<VariantRecord> out;
    for (auto& [lineno, f] : parse_tsv(text, source, kVariantHeader)) {
        VariantRecord v;
        v.gene_id = std::string(f[0]);
        if (v.gene_id.empty()) throw ParseError(std::string(source), lineno, "empty gene_id");
        v.position = parse_size(f[1], source, lineno, "position");
        v.ref = parse_base(f[2], source, lineno, "ref");
        v.alt = parse_base(f[3], source, lineno, "alt");
        if (v.ref == v.alt) throw ParseError(std::string(source), lineno, "ref and alt bases are identical");
        v.fitness = parse_real(f[4], source, lineno, "fitness");
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<VariantRecord> read_variants(const std::filesystem::path& path) {
    return parse_variants(read_text_file(path), path.string());
}

std::string format_variants(std::span<const VariantRecord> variants) {
    std::string out = "gene_id\tposition\tref\talt\tfitness\n";
    for (const auto& v : variants) {
        out += v.gene_id + '\t' + std::to_string(v.position) + '\t' + kAlphabet[v.ref & 3] + '\t' +
               kAlphabet[v.alt & 3] + '\t' + format_real(v.fitness) + '\n';
    }
    return out;
}

}  // namespace dnahnet::seq
