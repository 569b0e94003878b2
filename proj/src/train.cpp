#include "dnahnet/train.hpp"

#include <cmath>
#include <numbers>

#include "dnahnet/checkpoint.hpp"
#include "dnahnet/errors.hpp"
#include "dnahnet/io.hpp"
#include "dnahnet/ops.hpp"
#include "dnahnet/random.hpp"

namespace dnahnet::train {

using namespace dnahnet::ad;

double lr_at(std::size_t step, const TrainConfig& c) {
    if (step >= c.max_steps) return 0.0;
    if (step < c.warmup_steps) return c.base_lr * static_cast<double>(step) / static_cast<double>(c.warmup_steps);
    const double progress =
        static_cast<double>(step - c.warmup_steps) / static_cast<double>(c.max_steps - c.warmup_steps);
    return c.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
    double sq = 0;
    for (auto& p : params.items()) {
        for (double g : p.tensor.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& p : params.items()) {
            for (double& g : p.tensor.mutable_grad()) g *= scale;
        }
    }
    return norm;
}

AdamW::AdamW(ParameterSet& params, const TrainConfig& config) : params_(params), config_(config) {
    for (const auto& p : params_.items()) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    auto& items = params_.items();
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& p = items[i];
        const double rate = lr * p.lr_multiplier;
        const double decay = p.weight_decay ? config_.weight_decay : 0.0;
        auto theta = p.tensor.mutable_data();
        const auto g = p.tensor.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double gj = g.empty() ? 0.0 : g[j];
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            theta[j] -= rate * decay * theta[j];
            theta[j] -= rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.adam_eps);
        }
    }
}

std::vector<std::string> routing_warnings(const std::vector<double>& F) {
    std::vector<std::string> out;
    for (std::size_t s = 0; s < F.size(); ++s) {
        if (F[s] < kDegenerateLow || F[s] > kDegenerateHigh) {
            out.push_back("degenerate_routing_s" + std::to_string(s + 1) + " F=" + fmt9(F[s]));
        }
    }
    return out;
}

std::string format_metrics_row(const StepMetrics& m) {
    std::string row = std::to_string(m.step) + "," + fmt9(m.lr) + "," + fmt9(m.nll) + "," + fmt9(m.ppl);
    auto stage_field = [](const std::vector<double>& v, std::size_t s) { return s < v.size() ? fmt9(v[s]) : ""; };
    row += "," + stage_field(m.rate_loss, 0) + "," + stage_field(m.rate_loss, 1);
    row += "," + stage_field(m.F, 0) + "," + stage_field(m.G, 0);
    row += "," + stage_field(m.F, 1) + "," + stage_field(m.G, 1);
    std::string w;
    for (const auto& s : m.warnings) w += (w.empty() ? "" : ";") + s;
    return row + "," + w;
}

Trainer::Trainer(HNetModel& model, TrainConfig config, Corpus corpus)
    : model_(model), config_(std::move(config)), corpus_(std::move(corpus)), optimizer_(model.parameters(), config_) {
    config_.validate();
    if (corpus_.empty()) throw Error(ErrorKind::data, "train", "training corpus is empty");
    for (const auto& s : corpus_) {
        if (s.size() < 2) throw Error(ErrorKind::data, "train", "training sequences need at least 2 nucleotides");
    }
}

std::size_t Trainer::sample_index(std::size_t k) const {
    const std::size_t n = corpus_.size();
    const std::size_t epoch = k / n;
    Rng rng(config_.seed * 0x9E3779B97F4A7C15ULL + epoch + 1);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
    return perm[k % n];
}

StepMetrics Trainer::train_step() {
    auto& params = model_.parameters();
    params.zero_grads();
    const std::size_t per_step = config_.batch_size * config_.grad_accum;
    const std::size_t first = optimizer_.steps() * per_step;
    const std::size_t stages = model_.stages();

    StepMetrics m;
    m.step = optimizer_.steps() + 1;
    m.lr = lr_at(m.step, config_);
    m.rate_loss.assign(stages, 0.0);
    m.F.assign(stages, 0.0);
    m.G.assign(stages, 0.0);
    const double w = 1.0 / static_cast<double>(per_step);

    // The epoch permutation is shared by consecutive samples; rebuild it only
    // when the epoch changes.
    const std::size_t n = corpus_.size();
    std::size_t cached_epoch = static_cast<std::size_t>(-1);
    std::vector<std::size_t> perm;
    try {
        for (std::size_t i = 0; i < per_step; ++i) {
            const std::size_t k = first + i;
            if (k / n != cached_epoch) {
                cached_epoch = k / n;
                perm.clear();
                for (std::size_t j = 0; j < n; ++j) perm.push_back(sample_index(cached_epoch * n + j));
            }
            const auto& codes = corpus_[perm[k % n]];
            auto trace = model_.forward(codes);
            backward(affine(trace.total, w));
            m.nll += w * trace.nll.item();
            for (std::size_t s = 0; s < stages; ++s) {
                m.rate_loss[s] += w * trace.stages[s].rate_loss.item();
                m.F[s] += w * trace.stages[s].F;
                m.G[s] += w * trace.stages[s].G;
            }
        }
        for (const auto& p : params.items()) {
            for (double g : p.tensor.grad()) {
                if (!std::isfinite(g)) throw NumericsError("non-finite gradient in " + p.name, "train");
            }
        }
    } catch (const NumericsError& e) {
        params.zero_grads();
        throw NumericsError("step " + std::to_string(m.step) + ": " + e.what(), "train");
    }
    m.grad_norm = clip_grad_norm(params, config_.grad_clip);
    optimizer_.step(m.lr);
    m.ppl = std::exp(m.nll);
    m.warnings = routing_warnings(m.F);
    return m;
}

void Trainer::save(const std::filesystem::path& path, const RunConfig& run, DType dtype) const {
    RunConfig copy = run;
    copy.model = model_.config();
    copy.train = config_;
    write_file_atomic(config_path_for(path), format_config(copy));

    std::vector<ArrayEntry> entries;
    const auto& items = model_.parameters().items();
    auto& opt = const_cast<AdamW&>(optimizer_);
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& p = items[i];
        ArrayEntry param{p.name, dtype, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}};
        if (dtype == DType::f32) {
            for (auto& v : param.values) v = static_cast<double>(static_cast<float>(v));
        }
        entries.push_back(std::move(param));
        entries.push_back({"adam_m/" + p.name, DType::f64, p.tensor.shape(), opt.first_moments()[i]});
        entries.push_back({"adam_v/" + p.name, DType::f64, p.tensor.shape(), opt.second_moments()[i]});
    }
    entries.push_back({"trainer/step", DType::f64, {}, {static_cast<double>(optimizer_.steps())}});
    save_arrays(path, entries);
}

void Trainer::resume(const std::filesystem::path& path) {
    const auto entries = load_arrays(path);
    model_.import_parameters(entries);
    std::unordered_map<std::string, const ArrayEntry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;
    const auto& items = model_.parameters().items();
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (auto [prefix, target] : {std::pair{"adam_m/", &optimizer_.first_moments()[i]},
                                      std::pair{"adam_v/", &optimizer_.second_moments()[i]}}) {
            auto it = by_name.find(prefix + items[i].name);
            if (it == by_name.end() || it->second->values.size() != target->size()) {
                throw CheckpointError("checkpoint lacks optimizer state for " + items[i].name);
            }
            *target = it->second->values;
        }
    }
    auto it = by_name.find("trainer/step");
    if (it == by_name.end() || it->second->values.size() != 1) throw CheckpointError("checkpoint lacks trainer/step");
    optimizer_.set_steps(static_cast<std::size_t>(it->second->values[0]));
}

namespace {

void write_metrics(const std::filesystem::path& path, const std::vector<StepMetrics>& rows) {
    std::string out = std::string(kMetricsHeader) + "\n";
    for (const auto& r : rows) out += format_metrics_row(r) + "\n";
    write_file_atomic(path, out);
}

}  // namespace

FitResult fit(Trainer& trainer, const FitOptions& options) {
    FitResult result;
    const auto& cfg = trainer.config();
    while (trainer.step() < cfg.max_steps) {
        StepMetrics m;
        try {
            m = trainer.train_step();
        } catch (const NumericsError& e) {
            StepMetrics failed;
            failed.step = trainer.step() + 1;
            failed.lr = lr_at(failed.step, cfg);
            failed.warnings.push_back(std::string("numerics: ") + e.what());
            result.history.push_back(failed);
            if (!options.metrics.empty()) write_metrics(options.metrics, result.history);
            throw;
        }
        const bool log = m.step % cfg.log_every == 0 || m.step == 1 || m.step == cfg.max_steps || !m.warnings.empty();
        result.warnings += m.warnings.size();
        if (log) {
            result.history.push_back(m);
            if (options.on_log) options.on_log(m);
        }
        if (!options.checkpoint.empty() && cfg.checkpoint_every > 0 && m.step % cfg.checkpoint_every == 0) {
            trainer.save(options.checkpoint, options.run, options.dtype);
            if (!options.metrics.empty()) write_metrics(options.metrics, result.history);
        }
    }
    if (!options.checkpoint.empty()) trainer.save(options.checkpoint, options.run, options.dtype);
    if (!options.metrics.empty()) write_metrics(options.metrics, result.history);
    return result;
}

Corpus load_corpus(const DataConfig& data, bool eval_split) {
    const std::string& fasta = eval_split ? data.eval_fasta : data.train_fasta;
    Corpus out;
    if (fasta.empty()) {
        const std::uint64_t seed = eval_split ? data.synth_seed + 1000003 : data.synth_seed;
        for (auto& s : seq::synth_codon_corpus(data.synth_sequences, data.synth_length, seed)) {
            out.push_back(std::move(s.codes));
        }
        return out;
    }
    seq::EncodeOptions opts;
    if (data.randomize_ambiguous) opts.policy = seq::AmbiguityPolicy::randomize;
    opts.seed = data.synth_seed;
    for (const auto& rec : seq::read_fasta(fasta, opts)) {
        for (auto& w : seq::window_genome(rec, data.window)) {
            if (w.size() >= 2) out.push_back(std::move(w.codes));
        }
    }
    return out;
}

}  // namespace dnahnet::train
