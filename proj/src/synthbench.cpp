#include "dnahnet/synthbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dnahnet/errors.hpp"
#include "dnahnet/eval.hpp"
#include "dnahnet/io.hpp"

namespace dnahnet::synthbench {

double FixtureReport::phase_spread() const {
    const auto [lo, hi] = std::minmax_element(phase_rates.begin(), phase_rates.end());
    return *hi - *lo;
}

bool FixtureReport::compression_ok() const {
    if (F.size() != targets.size() || F.empty()) return false;
    for (std::size_t s = 0; s < F.size(); ++s) {
        if (!(F[s] > 0) || std::abs(1.0 / F[s] - targets[s]) / targets[s] > kCompressionTolerance) return false;
    }
    return true;
}

namespace {

struct Evaluation {
    double perplexity = 0;
    std::vector<double> F;
    std::array<double, 3> phase_rates{};
};

Evaluation evaluate(const HNetModel& model, const train::Corpus& heldout) {
    Evaluation out;
    out.perplexity = eval::eval_perplexity(model, heldout);
    std::vector<eval::WindowDecisions> decisions;
    std::vector<seq::GeneAnnotation> annotations;
    {
        ad::NoGradGuard guard;
        for (std::size_t i = 0; i < heldout.size(); ++i) {
            const std::string id = "synth" + std::to_string(i);
            decisions.push_back(eval::decisions_of(model.forward(heldout[i]), {id, 0, seq::Strand::forward}));
            annotations.push_back({id, id, 0, heldout[i].size(), seq::Strand::forward, seq::Region::coding, {}});
        }
    }
    const auto stats = eval::boundary_stats(decisions, annotations);
    for (const auto& st : stats) out.F.push_back(st.global.rate());
    if (!stats.empty()) {
        for (std::size_t k = 0; k < 3; ++k) out.phase_rates[k] = stats[0].phases[k].rate();
    }
    return out;
}

}  // namespace

FixtureReport run_trainability_fixture(const RunConfig& config, const Progress& progress) {
    if (!config.data.train_fasta.empty()) {
        throw ConfigError("the trainability fixture runs on the synthetic corpus; leave train_fasta empty");
    }
    const auto start = std::chrono::steady_clock::now();
    HNetModel model(config.model);
    train::Trainer trainer(model, config.train, train::load_corpus(config.data));
    train::FitOptions options;
    options.on_log = progress;
    auto fit = train::fit(trainer, options);

    FixtureReport r;
    const auto ev = evaluate(model, train::load_corpus(config.data, true));
    r.final_perplexity = ev.perplexity;
    r.unigram_perplexity = std::exp(seq::CodonSource::unigram_entropy());
    r.F = ev.F;
    r.targets = config.model.targets;
    r.phase_rates = ev.phase_rates;
    r.steps = trainer.step();
    r.history = std::move(fit.history);
    r.final_train_nll = r.history.empty() ? 0.0 : r.history.back().nll;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::vector<AblationRow> run_alpha_ablation(const RunConfig& config, const std::vector<double>& alphas,
                                            const Progress& progress) {
    std::vector<AblationRow> rows;
    for (double a : alphas) {
        RunConfig c = config;
        c.model.alpha = a;
        const auto r = run_trainability_fixture(c, progress);
        AblationRow row{a, r.F, std::log(r.final_perplexity), 0.0};
        for (std::size_t s = 0; s < r.F.size(); ++s) {
            row.deviation += std::abs(1.0 / r.F[s] - r.targets[s]) / r.targets[s];
        }
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const AblationRow& x, const AblationRow& y) { return x.deviation < y.deviation; });
    return rows;
}

std::string format_fixture_report(const FixtureReport& r) {
    std::string out = "metric,value\n";
    auto row = [&](const std::string& k, double v) { out += k + "," + fmt9(v) + "\n"; };
    row("final_perplexity", r.final_perplexity);
    row("unigram_perplexity", r.unigram_perplexity);
    row("final_train_nll", r.final_train_nll);
    for (std::size_t s = 0; s < r.F.size(); ++s) {
        row("F_s" + std::to_string(s + 1), r.F[s]);
        row("target_s" + std::to_string(s + 1), r.targets[s]);
    }
    for (std::size_t k = 0; k < 3; ++k) row("phase" + std::to_string(k + 1) + "_rate_s1", r.phase_rates[k]);
    row("phase_spread_s1", r.phase_spread());
    row("steps", static_cast<double>(r.steps));
    return out;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
    std::string out = std::string(kAblationHeader) + "\n";
    for (const auto& r : rows) {
        out += fmt9(r.alpha) + "," + fmt9(r.deviation) + "," + fmt9(r.final_nll);
        for (std::size_t s = 0; s < 2; ++s) out += "," + (s < r.F.size() ? fmt9(r.F[s]) : std::string());
        out += "\n";
    }
    return out;
}

}  // namespace dnahnet::synthbench
