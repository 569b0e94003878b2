#pragma once

// The hierarchical model: embedding, a recursive encoder / chunk / inner /
// dechunk / decoder pipeline, and a 4-way output head.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dnahnet/checkpoint.hpp"
#include "dnahnet/chunking.hpp"
#include "dnahnet/config.hpp"
#include "dnahnet/layers.hpp"
#include "dnahnet/parameters.hpp"
#include "dnahnet/seqdata.hpp"

namespace dnahnet {

using ad::Tensor;

// Anything that scores a nucleotide sequence. The sum runs over positions
// 1..L-1 (0-based); the first nucleotide has no context and is not scored.
class LikelihoodModel {
public:
    virtual ~LikelihoodModel() = default;
    virtual double sequence_loglik(std::span<const seq::Code> codes) const = 0;
};

struct StageTrace {
    chunking::BoundaryDecision decision;
    std::vector<std::size_t> chunk_map;
    std::vector<std::size_t> boundaries;
    double target = 1.0;
    double F = 0.0;  // mean of b
    double G = 0.0;  // mean of p
    Tensor G_tensor;
    Tensor rate_loss;  // zero when the target is 1

    std::size_t input_length() const { return decision.b.size(); }
    std::size_t chunks() const { return boundaries.size(); }
};

struct ForwardTrace {
    Tensor logits;  // [L, 4]; row t predicts x_{t+1}
    std::vector<StageTrace> stages;
    Tensor nll;    // mean over predicted positions; undefined when L < 2
    Tensor total;  // nll + alpha * sum of rate losses
};

class HNetModel : public LikelihoodModel {
public:
    explicit HNetModel(ModelConfig config);
    ~HNetModel() override;
    HNetModel(const HNetModel&) = delete;
    HNetModel& operator=(const HNetModel&) = delete;

    const ModelConfig& config() const { return config_; }
    ad::ParameterSet& parameters() { return params_; }
    const ad::ParameterSet& parameters() const { return params_; }
    std::size_t stages() const { return depth_; }

    // Losses are attached when L >= 2. Throws ContextError past the context.
    ForwardTrace forward(std::span<const seq::Code> codes) const;
    Tensor logits(std::span<const seq::Code> codes) const;

    double sequence_loglik(std::span<const seq::Code> codes) const override;

    // Incremental decoding. temperature 0 is argmax (ties to the lowest
    // code); otherwise seeded sampling from softmax(logits / temperature).
    // Returns the prompt followed by `length` new nucleotides. An empty
    // prompt starts from a first nucleotide drawn uniformly with the seed
    // (A at temperature 0).
    std::vector<seq::Code> generate(std::span<const seq::Code> prompt, std::size_t length, double temperature,
                                    std::uint64_t seed) const;
    // Same contract, re-running the full forward pass for every new token.
    std::vector<seq::Code> generate_reforward(std::span<const seq::Code> prompt, std::size_t length,
                                              double temperature, std::uint64_t seed) const;

    // Parameter values by name.
    std::vector<ad::ArrayEntry> export_parameters(ad::DType dtype = ad::DType::f64) const;
    // Every parameter must be present with a matching shape.
    void import_parameters(const std::vector<ad::ArrayEntry>& entries);

    struct Net;
    class Decoder;

private:
    ModelConfig config_;
    std::size_t depth_ = 0;
    ad::ParameterSet params_;
    std::unique_ptr<Net> net_;
};

// Target positions for next-nucleotide prediction: codes shifted by one,
// last position ignored (-1).
std::vector<int> next_targets(std::span<const seq::Code> codes);

// mean over t of -log softmax(logits[t-1])[x_t]
Tensor nll_loss(const Tensor& logits, std::span<const seq::Code> codes);
// nll + alpha * sum of rate losses
Tensor total_loss(const Tensor& nll, std::span<const Tensor> rate_losses, double alpha);

// Model weights in the array container plus the config as <path>.cfg.
void save_model(const std::filesystem::path& path, const HNetModel& model, const RunConfig& run);
std::unique_ptr<HNetModel> load_model(const std::filesystem::path& path, RunConfig* run = nullptr);
std::filesystem::path config_path_for(const std::filesystem::path& checkpoint);

}  // namespace dnahnet
