#pragma once

// Sequence-mixing layers. Every layer maps [L, D] to [L, D] causally and has a
// single-row step() used by incremental decoding; step() reproduces the
// matching row of forward() bit for bit.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dnahnet/layout.hpp"
#include "dnahnet/parameters.hpp"
#include "dnahnet/random.hpp"
#include "dnahnet/seqdata.hpp"

namespace dnahnet::model {

using ad::ParameterSet;
using ad::Tensor;

struct LayerShape {
    std::size_t dim = 0;
    std::size_t heads = 1;
    std::size_t ffn = 0;
    std::size_t state_dim = 128;
    std::size_t conv_width = 4;
};

// Registration context: parameter names get `prefix.` prepended.
struct Init {
    ParameterSet& params;
    Rng& rng;
    double std = 0.02;
    double lr_multiplier = 1.0;

    Tensor weight(const std::string& name, std::size_t rows, std::size_t cols) const;
    Tensor bias(const std::string& name, std::size_t n, double value = 0.0) const;
    Tensor gain(const std::string& name, std::size_t n) const;  // ones, never decayed
};

class Attention {
public:
    Attention(const Init& init, const std::string& prefix, const LayerShape& shape);
    Tensor forward(const Tensor& x) const;

    struct Cache {
        std::vector<double> keys, values;  // rows so far, rotated keys
        std::size_t len = 0;
    };
    Tensor step(const Tensor& x_row, Cache& cache) const;

    Tensor wq, wk, wv, wo;
    std::size_t heads;
};

// Gated diagonal linear recurrence:
//   u = silu(conv(x W_in)),  i = sigmoid(x W_i + b_i),  a = sigmoid(decay)
//   s_t = a * s_{t-1} + i_t * u_t
//   y = (s * sigmoid(x W_o + b_o)) W_out + b_out
class RecurrentMixer {
public:
    RecurrentMixer(const Init& init, const std::string& prefix, const LayerShape& shape);
    Tensor forward(const Tensor& x) const;

    struct Cache {
        std::vector<double> conv_inputs;  // last conv_width rows of x W_in
        std::size_t rows = 0;
        std::vector<double> state;
    };
    Tensor step(const Tensor& x_row, Cache& cache) const;

    Tensor w_in, conv_w, conv_b, w_gate_in, b_gate_in, decay, w_gate_out, b_gate_out, w_out, b_out;
    std::size_t state_dim, conv_width;
};

class FeedForward {
public:
    FeedForward(const Init& init, const std::string& prefix, std::size_t dim, std::size_t hidden);
    Tensor forward(const Tensor& x) const;

    Tensor w1, w2;
};

// Pre-normalised residual block: x + mix(norm(x)), then x + ffn(norm(x)) when
// the level has a feed-forward width.
class Block {
public:
    Block(const Init& init, const std::string& prefix, LayerKind kind, const LayerShape& shape);
    Tensor forward(const Tensor& x) const;

    struct Cache {
        Attention::Cache attention;
        RecurrentMixer::Cache mixer;
    };
    Tensor step(const Tensor& x_row, Cache& cache) const;

    LayerKind kind;
    Tensor norm;
    std::unique_ptr<Attention> attention;
    std::unique_ptr<RecurrentMixer> mixer;
    Tensor ffn_norm;
    std::unique_ptr<FeedForward> ffn;
};

class Stack {
public:
    Stack(const Init& init, const std::string& prefix, const StackSpec& spec, const LayerShape& shape);
    Tensor forward(const Tensor& x) const;

    using Cache = std::vector<Block::Cache>;
    Cache new_cache() const { return Cache(blocks.size()); }
    Tensor step(const Tensor& x_row, Cache& cache) const;

    std::vector<Block> blocks;
};

class Embedding {
public:
    Embedding(const Init& init, const std::string& prefix, std::size_t dim);
    Tensor forward(std::span<const seq::Code> codes) const;

    Tensor table;  // [4, D]
};

// Final RMS normalisation followed by a D x 4 projection.
class Head {
public:
    Head(const Init& init, const std::string& prefix, std::size_t dim);
    Tensor forward(const Tensor& x) const;

    Tensor norm, weight;
};

}  // namespace dnahnet::model
