#include "dnahnet/layers.hpp"

#include <algorithm>
#include <cmath>

#include "dnahnet/errors.hpp"
#include "dnahnet/kernels.hpp"
#include "dnahnet/ops.hpp"

namespace dnahnet::model {

using namespace dnahnet::ad;

Tensor Init::weight(const std::string& name, std::size_t rows, std::size_t cols) const {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = truncated_normal(rng, std);
    return params.add(name, Tensor::from({rows, cols}, std::move(v)), lr_multiplier, true);
}

Tensor Init::bias(const std::string& name, std::size_t n, double value) const {
    return params.add(name, Tensor::full({n}, value), lr_multiplier, true);
}

Tensor Init::gain(const std::string& name, std::size_t n) const {
    return params.add(name, Tensor::full({n}, 1.0), lr_multiplier, false);
}

namespace {

void check_width(const Tensor& x, std::size_t dim, const char* who) {
    if (x.rank() != 2 || x.cols() != dim) {
        throw ShapeError(std::string(who) + ": expected [L, " + std::to_string(dim) + "], got " +
                         shape_string(x.shape()));
    }
}

void append_row(std::vector<double>& buf, const Tensor& row) {
    buf.insert(buf.end(), row.data().begin(), row.data().end());
}

}  // namespace

Attention::Attention(const Init& init, const std::string& prefix, const LayerShape& shape)
    : wq(init.weight(prefix + ".wq", shape.dim, shape.dim)),
      wk(init.weight(prefix + ".wk", shape.dim, shape.dim)),
      wv(init.weight(prefix + ".wv", shape.dim, shape.dim)),
      wo(init.weight(prefix + ".wo", shape.dim, shape.dim)),
      heads(shape.heads) {
    if (heads == 0 || shape.dim % heads != 0) throw ShapeError("attention: heads must divide the model dimension");
}

Tensor Attention::forward(const Tensor& x) const {
    check_width(x, wq.rows(), "attention");
    auto q = rotary(matmul(x, wq), heads);
    auto k = rotary(matmul(x, wk), heads);
    auto v = matmul(x, wv);
    return matmul(causal_attention(q, k, v, heads), wo);
}

Tensor Attention::step(const Tensor& x_row, Cache& cache) const {
    const std::size_t D = wq.rows();
    auto q = rotary(matmul(x_row, wq), heads, cache.len);
    append_row(cache.keys, rotary(matmul(x_row, wk), heads, cache.len));
    append_row(cache.values, matmul(x_row, wv));
    ++cache.len;
    std::vector<double> out(D);
    kernels::attention_query(cache.len, D, heads, q.data(), cache.keys, cache.values, out);
    return matmul(Tensor::from({1, D}, std::move(out)), wo);
}

RecurrentMixer::RecurrentMixer(const Init& init, const std::string& prefix, const LayerShape& shape)
    : w_in(init.weight(prefix + ".w_in", shape.dim, shape.state_dim)),
      conv_w(init.weight(prefix + ".conv_w", shape.conv_width, shape.state_dim)),
      conv_b(init.bias(prefix + ".conv_b", shape.state_dim)),
      w_gate_in(init.weight(prefix + ".w_gate_in", shape.dim, shape.state_dim)),
      b_gate_in(init.bias(prefix + ".b_gate_in", shape.state_dim)),
      decay(Tensor()),
      w_gate_out(init.weight(prefix + ".w_gate_out", shape.dim, shape.state_dim)),
      b_gate_out(init.bias(prefix + ".b_gate_out", shape.state_dim)),
      w_out(init.weight(prefix + ".w_out", shape.state_dim, shape.dim)),
      b_out(init.bias(prefix + ".b_out", shape.dim)),
      state_dim(shape.state_dim),
      conv_width(shape.conv_width) {
    // Decays spread over (0.5, 0.99) so channels cover short and long memories.
    std::vector<double> logits(state_dim);
    for (std::size_t i = 0; i < state_dim; ++i) {
        const double a = 0.5 + 0.49 * (state_dim == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(state_dim - 1));
        logits[i] = std::log(a / (1 - a));
    }
    decay = init.params.add(prefix + ".decay", Tensor::from({1, state_dim}, std::move(logits)), init.lr_multiplier,
                            true);
}

Tensor RecurrentMixer::forward(const Tensor& x) const {
    check_width(x, w_in.rows(), "recurrent mixer");
    auto u = silu(causal_conv1d(matmul(x, w_in), conv_w, conv_b));
    auto gate_in = sigmoid(add(matmul(x, w_gate_in), b_gate_in));
    auto s = scan(sigmoid(decay), mul(gate_in, u));
    auto gate_out = sigmoid(add(matmul(x, w_gate_out), b_gate_out));
    return add(matmul(mul(s, gate_out), w_out), b_out);
}

Tensor RecurrentMixer::step(const Tensor& x_row, Cache& cache) const {
    const std::size_t n = state_dim;
    append_row(cache.conv_inputs, matmul(x_row, w_in));
    ++cache.rows;
    if (cache.rows > conv_width) {
        cache.conv_inputs.erase(cache.conv_inputs.begin(), cache.conv_inputs.begin() + static_cast<std::ptrdiff_t>(n));
        cache.rows = conv_width;
    }
    auto window = Tensor::from({cache.rows, n}, cache.conv_inputs);
    auto u = silu(slice_rows(causal_conv1d(window, conv_w, conv_b), cache.rows - 1, cache.rows));
    auto gate_in = sigmoid(add(matmul(x_row, w_gate_in), b_gate_in));
    auto drive = mul(gate_in, u);
    auto a = sigmoid(decay);
    if (cache.state.empty()) cache.state.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) cache.state[j] = a.data()[j] * cache.state[j] + drive.data()[j];
    auto s = Tensor::from({1, n}, cache.state);
    auto gate_out = sigmoid(add(matmul(x_row, w_gate_out), b_gate_out));
    return add(matmul(mul(s, gate_out), w_out), b_out);
}

FeedForward::FeedForward(const Init& init, const std::string& prefix, std::size_t dim, std::size_t hidden)
    : w1(init.weight(prefix + ".w1", dim, hidden)), w2(init.weight(prefix + ".w2", hidden, dim)) {}

Tensor FeedForward::forward(const Tensor& x) const { return matmul(silu(matmul(x, w1)), w2); }

Block::Block(const Init& init, const std::string& prefix, LayerKind kind_, const LayerShape& shape)
    : kind(kind_), norm(init.gain(prefix + ".norm", shape.dim)) {
    if (kind == LayerKind::attention) {
        attention = std::make_unique<Attention>(init, prefix, shape);
    } else {
        mixer = std::make_unique<RecurrentMixer>(init, prefix, shape);
    }
    if (shape.ffn > 0) {
        ffn_norm = init.gain(prefix + ".ffn_norm", shape.dim);
        ffn = std::make_unique<FeedForward>(init, prefix + ".ffn", shape.dim, shape.ffn);
    }
}

Tensor Block::forward(const Tensor& x) const {
    auto h = rms_norm(x, norm);
    auto y = add(x, attention ? attention->forward(h) : mixer->forward(h));
    if (ffn) y = add(y, ffn->forward(rms_norm(y, ffn_norm)));
    return y;
}

Tensor Block::step(const Tensor& x_row, Cache& cache) const {
    auto h = rms_norm(x_row, norm);
    auto y = add(x_row, attention ? attention->step(h, cache.attention) : mixer->step(h, cache.mixer));
    if (ffn) y = add(y, ffn->forward(rms_norm(y, ffn_norm)));
    return y;
}

Stack::Stack(const Init& init, const std::string& prefix, const StackSpec& spec, const LayerShape& shape) {
    const auto kinds = spec.layers();
    blocks.reserve(kinds.size());
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        const std::string name = prefix + (kinds[i] == LayerKind::attention ? ".attn" : ".mixer") + std::to_string(i);
        blocks.emplace_back(init, name, kinds[i], shape);
    }
}

Tensor Stack::forward(const Tensor& x) const {
    Tensor h = x;
    for (const auto& b : blocks) h = b.forward(h);
    return h;
}

Tensor Stack::step(const Tensor& x_row, Cache& cache) const {
    Tensor h = x_row;
    for (std::size_t i = 0; i < blocks.size(); ++i) h = blocks[i].step(h, cache[i]);
    return h;
}

Embedding::Embedding(const Init& init, const std::string& prefix, std::size_t dim) {
    std::vector<double> v(4 * dim);
    for (auto& x : v) x = truncated_normal(init.rng, init.std);
    table = init.params.add(prefix + ".table", Tensor::from({4, dim}, std::move(v)), init.lr_multiplier, false);
}

Tensor Embedding::forward(std::span<const seq::Code> codes) const {
    std::vector<std::size_t> idx(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] > 3) throw ShapeError("embedding: code " + std::to_string(codes[i]) + " outside 0..3");
        idx[i] = codes[i];
    }
    return gather_rows(table, idx);
}

Head::Head(const Init& init, const std::string& prefix, std::size_t dim)
    : norm(init.gain(prefix + ".norm", dim)), weight(init.weight(prefix + ".weight", dim, 4)) {}

Tensor Head::forward(const Tensor& x) const { return matmul(rms_norm(x, norm), weight); }

}  // namespace dnahnet::model
