#include "dnahnet/flops.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "dnahnet/errors.hpp"
#include "dnahnet/io.hpp"

namespace dnahnet::flops {

std::size_t block_parameters(const ModelConfig& c, std::size_t level, bool attention) {
    const std::size_t d = c.levels[level].dim, n = c.state_dim, w = c.conv_width, f = c.levels[level].ffn;
    std::size_t p = d;  // pre-norm gain
    p += attention ? 4 * d * d : 4 * d * n + w * n + 4 * n + d;
    if (f > 0) p += d + 2 * d * f;
    return p;
}

namespace {

struct Cost {
    double linear = 0;     // 2 x parameters x length
    double quadratic = 0;  // attention score terms
};

Cost stack_cost(const ModelConfig& c, std::size_t level, const model::StackSpec& stack, double len) {
    Cost out;
    const double d = static_cast<double>(c.levels[level].dim);
    for (auto kind : stack.layers()) {
        const bool attn = kind == model::LayerKind::attention;
        out.linear += 2.0 * static_cast<double>(block_parameters(c, level, attn)) * len;
        if (attn) out.quadratic += 4.0 * len * len * d * kCausalFactor;
    }
    return out;
}

FlopReport estimate(const ModelConfig& c, double length, std::span<const double> ratios, bool plain) {
    if (!(length >= 1)) throw DomainError("flop estimate needs a length >= 1");
    FlopReport r;
    r.length = length;
    const model::LayoutNode tree = c.tree();
    const model::LayoutNode* node = &tree;
    double len = length;
    std::size_t level = 0;
    while (node->is_stage) {
        const double d = static_cast<double>(c.levels[level].dim);
        const double inner_d = static_cast<double>(c.levels[level + 1].dim);
        const auto enc = stack_cost(c, level, node->encoder, len);
        const auto dec = stack_cost(c, level, node->decoder, len);
        r.enc += enc.linear + enc.quadratic;
        r.dec += dec.linear + dec.quadratic;
        if (!plain) r.routing += 2.0 * (2.0 * d * d) * len;
        const double ratio = plain ? 1.0 : ratios[level];
        if (!(ratio >= 1)) throw DomainError("compression ratios must be >= 1");
        r.r_eff *= ratio;
        len /= ratio;
        if (inner_d != d) r.main += 2.0 * (2.0 * d * inner_d) * len;
        node = node->inner.get();
        ++level;
    }
    const auto main = stack_cost(c, level, node->stack, len);
    r.main += main.linear + main.quadratic;
    r.quadratic_subtotal = main.quadratic;
    const double d0 = static_cast<double>(c.levels[0].dim);
    r.dec += 2.0 * (d0 + 4.0 * d0) * length;
    return r;
}

}  // namespace

FlopReport flops_estimate(const ModelConfig& config, double length) {
    return estimate(config, length, config.targets, false);
}

FlopReport flops_estimate(const ModelConfig& config, double length, std::span<const double> ratios) {
    if (ratios.size() != config.stages()) throw DomainError("one compression ratio per stage is required");
    return estimate(config, length, ratios, false);
}

FlopReport plain_estimate(const ModelConfig& config, double length) {
    return estimate(config, length, config.targets, true);
}

double training_flops(const ModelConfig& config, double length, double tokens) {
    return kTrainingMultiplier * flops_estimate(config, length).per_token() * tokens;
}

Sweep flops_sweep(const ModelConfig& config, std::span<const double> lengths) {
    Sweep s;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (i > 0 && lengths[i] < lengths[i - 1]) throw DomainError("sweep lengths must be sorted ascending");
        s.hierarchical.push_back(flops_estimate(config, lengths[i]));
        s.plain.push_back(plain_estimate(config, lengths[i]));
    }
    // Per-token cost is a + b * L for both; the lines meet at (a_h - a_p) / (b_p - b_h).
    auto line = [&](bool plain) {
        const double p1 = plain ? plain_estimate(config, 1).per_token() : flops_estimate(config, 1).per_token();
        const double p2 = plain ? plain_estimate(config, 2).per_token() : flops_estimate(config, 2).per_token();
        return std::pair{2 * p1 - p2, p2 - p1};
    };
    const auto [ah, bh] = line(false);
    const auto [ap, bp] = line(true);
    if (ah <= ap && bh <= bp) {
        s.crossing = 0.0;
    } else if (bh < bp) {
        s.crossing = (ah - ap) / (bp - bh);
    }
    return s;
}

std::string flop_conventions() {
    return "# flops: 2 per multiply-add; layers 2*params*len; attention +4*len^2*dim*" + fmt9(kCausalFactor) +
           " per layer; routing 4*dim^2*len per stage; training = " + fmt9(kTrainingMultiplier) +
           " x forward x tokens\n";
}

std::string format_flops(std::span<const FlopReport> reports) {
    std::string out = flop_conventions() + kFlopsHeader + "\n";
    for (const auto& r : reports) {
        out += fmt9(r.length) + "," + fmt9(r.total()) + "," + fmt9(r.per_token()) + "," + fmt9(r.enc) + "," +
               fmt9(r.main) + "," + fmt9(r.dec) + "," + fmt9(r.routing) + "," + fmt9(r.quadratic_subtotal) + "," +
               fmt9(r.r_eff) + "\n";
    }
    return out;
}

PowerLawFit fit_power_law(std::span<const ScalingPoint> points) {
    if (points.size() < 2) throw DegenerateError("flops", "a power-law fit needs at least 2 points");
    const double n = static_cast<double>(points.size());
    double mx = 0, my = 0;
    for (const auto& p : points) {
        if (!(p.compute > 0) || !(p.perplexity > 0)) {
            throw DegenerateError("flops", "compute and perplexity must be positive");
        }
        mx += std::log(p.compute) / n;
        my += std::log(p.perplexity) / n;
    }
    double sxx = 0, sxy = 0;
    for (const auto& p : points) {
        const double dx = std::log(p.compute) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(p.perplexity) - my);
    }
    if (sxx == 0) throw DegenerateError("flops", "all compute values are identical");
    const double slope = sxy / sxx;
    PowerLawFit f;
    f.alpha = -slope;
    f.A = std::exp(my - slope * mx);
    f.n_points = points.size();
    double ss = 0;
    for (const auto& p : points) {
        const double e = std::log(p.perplexity) - (my + slope * (std::log(p.compute) - mx));
        ss += e * e;
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

std::string format_fit(const PowerLawFit& f) {
    return std::string(kFitHeader) + "\n" + fmt9(f.A) + "," + fmt9(f.alpha) + "," + fmt9(f.residual) + "," +
           std::to_string(f.n_points) + "\n";
}

std::vector<ScalingPoint> parse_scaling_points(std::string_view text, std::string_view source) {
    std::vector<ScalingPoint> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            if (line != "compute,perplexity") {
                throw ParseError(std::string(source), lineno, "expected header compute,perplexity");
            }
            continue;
        }
        const auto comma = line.find(',');
        ScalingPoint p;
        auto parse = [&](std::string_view s, double& v) {
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            return ec == std::errc() && ptr == s.data() + s.size();
        };
        if (comma == std::string::npos || !parse(std::string_view(line).substr(0, comma), p.compute) ||
            !parse(std::string_view(line).substr(comma + 1), p.perplexity)) {
            throw ParseError(std::string(source), lineno, "expected two numbers");
        }
        out.push_back(p);
    }
    if (header) throw ParseError(std::string(source), lineno, "empty points file");
    return out;
}

}  // namespace dnahnet::flops
