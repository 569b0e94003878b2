#pragma once

// AdamW with linear warmup and cosine decay, per-level learning-rate
// multipliers, gradient accumulation, checkpoint/resume and routing
// diagnostics.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dnahnet/config.hpp"
#include "dnahnet/hnet.hpp"

namespace dnahnet::train {

using Corpus = std::vector<std::vector<seq::Code>>;

// Rate for update number `step` (1-based; 0 gives 0): linear ramp to base_lr
// over warmup_steps, then cosine down to 0 at max_steps.
double lr_at(std::size_t step, const TrainConfig& config);

// Scales all gradients so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(ad::ParameterSet& params, double max_norm);

// Decoupled weight decay: theta -= lr * wd * theta, then the Adam step.
class AdamW {
public:
    AdamW(ad::ParameterSet& params, const TrainConfig& config);
    // One update; the rate of each parameter is lr * its multiplier.
    void step(double lr);

    std::size_t steps() const { return t_; }
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    void set_steps(std::size_t t) { t_ = t; }

private:
    ad::ParameterSet& params_;
    TrainConfig config_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

inline constexpr double kDegenerateLow = 0.02;
inline constexpr double kDegenerateHigh = 0.98;

struct StepMetrics {
    std::size_t step = 0;  // updates completed, including this one
    double lr = 0.0;
    double nll = 0.0;
    double ppl = 0.0;
    double grad_norm = 0.0;
    std::vector<double> rate_loss, F, G;  // per stage, batch means
    std::vector<std::string> warnings;
};

inline constexpr const char* kMetricsHeader = "step,lr,nll,ppl,rate_loss_s1,rate_loss_s2,F_s1,G_s1,F_s2,G_s2,warnings";
std::string format_metrics_row(const StepMetrics& m);

// Routing warnings for one set of per-stage boundary fractions.
std::vector<std::string> routing_warnings(const std::vector<double>& F);

class Trainer {
public:
    Trainer(HNetModel& model, TrainConfig config, Corpus corpus);

    // One optimizer update over batch_size * grad_accum sequences. A
    // NumericsError leaves the parameters untouched and is rethrown with the
    // step number.
    StepMetrics train_step();

    std::size_t step() const { return optimizer_.steps(); }
    const TrainConfig& config() const { return config_; }
    HNetModel& model() { return model_; }

    // Parameters, moments and step counter. The data order is a function of
    // (seed, step), so resuming continues the same sequence.
    void save(const std::filesystem::path& path, const RunConfig& run, ad::DType params = ad::DType::f64) const;
    void resume(const std::filesystem::path& path);

    // Index into the corpus of the k-th sequence consumed overall.
    std::size_t sample_index(std::size_t k) const;

private:
    HNetModel& model_;
    TrainConfig config_;
    Corpus corpus_;
    AdamW optimizer_;
};

struct FitOptions {
    std::filesystem::path checkpoint;  // empty = no checkpoints
    std::filesystem::path metrics;     // empty = no CSV
    RunConfig run;                     // stored next to checkpoints
    ad::DType dtype = ad::DType::f64;  // parameter storage in checkpoints
    std::function<void(const StepMetrics&)> on_log;
};

struct FitResult {
    std::vector<StepMetrics> history;  // logged steps
    std::size_t warnings = 0;
};

// Runs from the trainer's current step to max_steps.
FitResult fit(Trainer& trainer, const FitOptions& options);

// Corpus for a run: FASTA windows, or the synthetic codon corpus when no
// training FASTA is configured.
Corpus load_corpus(const DataConfig& data, bool eval_split = false);

}  // namespace dnahnet::train
