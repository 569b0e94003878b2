#pragma once

// Model, training and data settings, stored as INI text with sections
// [model], [train] and [data].

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dnahnet/layout.hpp"

namespace dnahnet {

// Per hierarchy level (outermost first): width, attention heads,
// feed-forward width (0 = no feed-forward) and learning-rate multiplier.
struct LevelSpec {
    std::size_t dim = 0;
    std::size_t heads = 1;
    std::size_t ffn = 0;
    double lr_multiplier = 1.0;

    bool operator==(const LevelSpec&) const = default;
};

// How upsampled chunk vectors are scaled.
//   ste:     forward 1, backward as if scaled by p (boundary) or 1 - p (interior)
//   relaxed: forward actually scaled by that surrogate
//   off:     plain copy, no gradient to p
enum class Confidence { ste, relaxed, off };
std::string_view confidence_name(Confidence c);

struct ModelConfig {
    std::string layout = R"(["m4", ["T1m4", ["T7"], "m4T1"], "m4"])";
    std::vector<LevelSpec> levels = {{512, 8, 0, 2.0}, {640, 10, 1024, 1.5}, {768, 12, 2048, 1.0}};
    std::vector<double> targets = {3.0, 2.0};  // one per stage, outermost first
    double alpha = 0.01;
    std::size_t state_dim = 128;
    std::size_t conv_width = 4;
    std::size_t context = 8192;
    Confidence confidence = Confidence::ste;
    bool encoder_residual = true;
    double init_std = 0.02;
    std::uint64_t init_seed = 0;

    model::LayoutNode tree() const;
    std::size_t stages() const { return tree().depth(); }
    // Throws ConfigError on any inconsistency.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
    double base_lr = 8e-4;
    double weight_decay = 0.05;
    double grad_clip = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double adam_eps = 1e-8;
    std::size_t warmup_steps = 100;
    std::size_t max_steps = 1000;
    std::size_t batch_size = 8;
    std::size_t grad_accum = 1;
    std::size_t log_every = 10;
    std::size_t checkpoint_every = 0;  // 0 = only at the end
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct DataConfig {
    std::string train_fasta;  // empty = synthetic codon corpus
    std::string eval_fasta;
    std::size_t window = 8192;
    bool randomize_ambiguous = false;
    std::size_t synth_sequences = 64;
    std::size_t synth_length = 192;
    std::uint64_t synth_seed = 0;
    std::string checkpoint = "model.ckpt";
    std::string metrics = "metrics.csv";

    bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;

    bool operator==(const RunConfig&) const = default;
};

// Keys missing from the text keep their defaults; unknown keys are errors.
// Relative data paths are returned as written.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>");
RunConfig read_config(const std::filesystem::path& path);
// Every field, defaults included.
std::string format_config(const RunConfig& config);

}  // namespace dnahnet
