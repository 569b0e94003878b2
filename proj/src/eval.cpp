#include "dnahnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "dnahnet/errors.hpp"
#include "dnahnet/io.hpp"

namespace dnahnet::eval {

namespace {

std::unordered_map<std::string, const seq::NucleotideSequence*> by_id(
    std::span<const seq::NucleotideSequence> records) {
    std::unordered_map<std::string, const seq::NucleotideSequence*> out;
    for (const auto& r : records) out.emplace(r.id, &r);
    return out;
}

}  // namespace

VepResult vep_score(const LikelihoodModel& model, std::span<const seq::NucleotideSequence> references,
                    std::span<const seq::VariantRecord> variants) {
    const auto refs = by_id(references);
    std::unordered_map<std::string, double> ref_loglik;
    VepResult out;
    for (const auto& v : variants) {
        const std::string id = v.gene_id + ":" + std::to_string(v.position);
        auto it = refs.find(v.gene_id);
        if (it == refs.end()) {
            out.skipped.push_back({id, "no reference sequence named " + v.gene_id});
            continue;
        }
        seq::NucleotideSequence mutated;
        try {
            mutated = seq::apply_variant(*it->second, v);
        } catch (const RefMismatchError& e) {
            out.skipped.push_back({id, e.what()});
            continue;
        }
        auto cached = ref_loglik.find(v.gene_id);
        if (cached == ref_loglik.end()) {
            cached = ref_loglik.emplace(v.gene_id, model.sequence_loglik(it->second->codes)).first;
        }
        out.scored.push_back({v, model.sequence_loglik(mutated.codes) - cached->second});
    }
    return out;
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DegenerateError("eval", "spearman needs equally long inputs");
    if (xs.size() < 2) throw DegenerateError("eval", "spearman needs at least 2 points");
    const auto rx = average_ranks(xs), ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) throw DegenerateError("eval", "spearman is undefined for constant input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

EssentialityResult essentiality_scores(const LikelihoodModel& model, std::span<const seq::NucleotideSequence> genomes,
                                       std::span<const seq::GeneAnnotation> genes, std::size_t window) {
    const auto lookup = by_id(genomes);
    EssentialityResult out;
    for (const auto& g : genes) {
        if (g.region != seq::Region::coding) continue;
        auto it = lookup.find(g.genome_id);
        if (it == lookup.end()) {
            out.skipped.push_back({g.gene_id, "no genome named " + g.genome_id});
            continue;
        }
        try {
            const auto ko = seq::make_knockout(*it->second, g, std::min(window, it->second->size()));
            const double score =
                model.sequence_loglik(ko.wildtype.codes) - model.sequence_loglik(ko.knockout.codes);
            out.scored.push_back({g.gene_id, score, g.essential});
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::numeric) throw;
            out.skipped.push_back({g.gene_id, e.what()});
        }
    }
    return out;
}

double auroc(std::span<const double> scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw DegenerateError("eval", "auroc needs one label per score");
    // Rank-sum form of the pairwise count; average ranks give ties half a win.
    const auto ranks = average_ranks(scores);
    double pos = 0, neg = 0, rank_sum = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) {
            ++pos;
            rank_sum += ranks[i];
        } else {
            ++neg;
        }
    }
    if (pos == 0 || neg == 0) throw DegenerateError("eval", "auroc needs both positive and negative labels");
    return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

double eval_perplexity(const LikelihoodModel& model, std::span<const std::vector<seq::Code>> corpus) {
    double nll = 0, tokens = 0;
    for (const auto& s : corpus) {
        if (s.size() < 2) continue;
        nll -= model.sequence_loglik(s);
        tokens += static_cast<double>(s.size() - 1);
    }
    if (tokens == 0) throw DegenerateError("eval", "no sequence of length >= 2 to evaluate");
    return std::exp(nll / tokens);
}

double Count::rate() const {
    return denominator == 0 ? std::numeric_limits<double>::quiet_NaN()
                            : static_cast<double>(numerator) / static_cast<double>(denominator);
}

WindowDecisions decisions_of(const ForwardTrace& trace, const seq::Origin& origin) {
    WindowDecisions w;
    w.origin = origin;
    for (const auto& s : trace.stages) {
        w.b.push_back(s.decision.b);
        w.boundaries.push_back(s.boundaries);
    }
    return w;
}

namespace {

// Most specific label wins where annotations overlap.
int specificity(seq::Region r) {
    switch (r) {
        case seq::Region::start_codon: return 5;
        case seq::Region::stop_codon: return 4;
        case seq::Region::coding: return 3;
        case seq::Region::promoter: return 2;
        case seq::Region::intergenic: return 1;
        case seq::Region::other: return 0;
    }
    return 0;
}

struct NucleotideLabels {
    std::vector<std::optional<seq::Region>> region;
    std::vector<std::uint8_t> phase;  // 0 outside coding annotations
};

NucleotideLabels label_window(const seq::Origin& origin, std::size_t length,
                              std::span<const seq::GeneAnnotation> annotations) {
    if (origin.strand != seq::Strand::forward) {
        throw AnnotationError("boundary statistics need forward-oriented windows");
    }
    NucleotideLabels out{std::vector<std::optional<seq::Region>>(length), std::vector<std::uint8_t>(length, 0)};
    const std::size_t lo = origin.start, hi = origin.start + length;
    auto paint = [&](std::size_t pos, seq::Region r) {
        auto& slot = out.region[pos - lo];
        if (!slot || specificity(r) > specificity(*slot)) slot = r;
    };
    for (const auto& a : annotations) {
        if (a.genome_id != origin.genome_id || a.end <= lo || a.start >= hi) continue;
        const std::size_t from = std::max(a.start, lo), to = std::min(a.end, hi);
        for (std::size_t pos = from; pos < to; ++pos) {
            seq::Region r = a.region;
            if (r == seq::Region::coding) {
                // Offset from the first base in gene orientation.
                const std::size_t o = a.strand == seq::Strand::forward ? pos - a.start : a.end - 1 - pos;
                out.phase[pos - lo] = static_cast<std::uint8_t>(o % 3 + 1);
                if (a.length() >= 6 && o < 3) r = seq::Region::start_codon;
                if (a.length() >= 6 && o + 3 >= a.length()) r = seq::Region::stop_codon;
            }
            paint(pos, r);
        }
    }
    return out;
}

}  // namespace

std::vector<BoundaryStats> boundary_stats(std::span<const WindowDecisions> windows,
                                          std::span<const seq::GeneAnnotation> annotations) {
    std::size_t stages = 0;
    for (const auto& w : windows) stages = std::max(stages, w.b.size());
    std::vector<BoundaryStats> out(stages);
    for (std::size_t s = 0; s < stages; ++s) {
        out[s].stage = s + 1;
        for (auto r : seq::kRegions) out[s].regions[r] = {};
    }
    for (const auto& w : windows) {
        if (w.b.empty()) continue;
        const auto labels = label_window(w.origin, w.b[0].size(), annotations);
        // Nucleotide that opened each position of the current stage's input.
        std::vector<std::size_t> opener(w.b[0].size());
        std::iota(opener.begin(), opener.end(), 0);
        for (std::size_t s = 0; s < w.b.size(); ++s) {
            if (w.b[s].size() != opener.size()) {
                throw AnnotationError("stage " + std::to_string(s + 1) + " decisions do not match the chunk count");
            }
            auto& st = out[s];
            for (std::size_t t = 0; t < opener.size(); ++t) {
                const std::size_t nt = opener[t];
                const std::size_t hit = w.b[s][t] ? 1 : 0;
                if (!labels.region[nt]) {
                    ++st.uncovered;
                    continue;
                }
                st.global.numerator += hit;
                ++st.global.denominator;
                auto& rc = st.regions[*labels.region[nt]];
                rc.numerator += hit;
                ++rc.denominator;
                if (labels.phase[nt]) {
                    auto& pc = st.phases[labels.phase[nt] - 1];
                    pc.numerator += hit;
                    ++pc.denominator;
                }
            }
            std::vector<std::size_t> next;
            for (std::size_t j : w.boundaries[s]) next.push_back(opener.at(j));
            opener = std::move(next);
        }
    }
    return out;
}

std::vector<BoundaryStats> boundary_stats(const HNetModel& model, std::span<const seq::NucleotideSequence> windows,
                                          std::span<const seq::GeneAnnotation> annotations) {
    std::vector<WindowDecisions> decisions;
    ad::NoGradGuard guard;
    for (const auto& w : windows) {
        seq::Origin origin = w.origin.value_or(seq::Origin{w.id, 0, seq::Strand::forward});
        decisions.push_back(decisions_of(model.forward(w.codes), origin));
    }
    return boundary_stats(decisions, annotations);
}

namespace {

std::string rate_field(const Count& c) { return c.denominator == 0 ? "NA" : fmt9(c.rate()); }

std::string count_row(std::size_t stage, const char* cls, std::string_view feature, const Count& c) {
    return std::to_string(stage) + "," + cls + "," + std::string(feature) + "," + rate_field(c) + "," +
           std::to_string(c.numerator) + "," + std::to_string(c.denominator) + "\n";
}

}  // namespace

std::string format_boundary_stats(std::span<const BoundaryStats> stats) {
    std::string out = std::string(kBoundaryStatsHeader) + "\n";
    for (const auto& s : stats) {
        out += count_row(s.stage, "global", "all", s.global);
        for (auto r : seq::kRegions) out += count_row(s.stage, "region", seq::region_name(r), s.regions.at(r));
        for (std::size_t k = 0; k < 3; ++k) out += count_row(s.stage, "codon_position", std::to_string(k + 1), s.phases[k]);
    }
    return out;
}

std::string render_boundary_table(std::span<const BoundaryStats> stats) {
    auto pct = [](const Count& c) {
        if (c.denominator == 0) return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * c.rate());
        return std::string(buf);
    };
    auto line = [&](const std::string& label, auto&& get) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%-24s", label.c_str());
        std::string row = buf;
        for (const auto& s : stats) {
            std::snprintf(buf, sizeof buf, "%10s", pct(get(s)).c_str());
            row += buf;
        }
        return row + "\n";
    };
    std::string out(24, ' ');
    for (const auto& s : stats) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%10s", ("Stage " + std::to_string(s.stage)).c_str());
        out += buf;
    }
    out += "\n";
    out += line("Global selection rate", [](const BoundaryStats& s) { return s.global; });
    out += "Functional regions\n";
    for (auto r : seq::kRegions) {
        out += line("  " + std::string(seq::region_name(r)), [r](const BoundaryStats& s) { return s.regions.at(r); });
    }
    out += "Codon position (coding only)\n";
    for (std::size_t k = 0; k < 3; ++k) {
        out += line("  Position " + std::to_string(k + 1), [k](const BoundaryStats& s) { return s.phases[k]; });
    }
    return out;
}

std::string format_boundary_dump(const std::string& seq_id, const ForwardTrace& trace) {
    std::string out;
    for (std::size_t s = 0; s < trace.stages.size(); ++s) {
        const auto& d = trace.stages[s].decision;
        for (std::size_t t = 0; t < d.b.size(); ++t) {
            out += seq_id + "," + std::to_string(s + 1) + "," + std::to_string(t + 1) + "," + fmt9(d.p[t]) + "," +
                   std::to_string(d.b[t]) + "\n";
        }
    }
    return out;
}

std::string format_vep(const VepResult& result) {
    std::string out = std::string(kVepHeader) + "\n";
    for (const auto& s : result.scored) {
        const auto& v = s.variant;
        out += v.gene_id + "," + std::to_string(v.position) + "," + seq::kAlphabet[v.ref] + "," +
               seq::kAlphabet[v.alt] + "," + fmt9(s.score) + "," + fmt9(v.fitness) + "\n";
    }
    return out;
}

std::string format_essentiality(const EssentialityResult& result) {
    std::string out = std::string(kEssentialityHeader) + "\n";
    for (const auto& g : result.scored) {
        out += g.gene_id + "," + fmt9(g.score) + "," + (g.essential ? (*g.essential ? "1" : "0") : "NA") + "\n";
    }
    return out;
}

}  // namespace dnahnet::eval
