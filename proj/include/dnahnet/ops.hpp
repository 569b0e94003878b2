#pragma once

// Differentiable primitives. Operands are viewed as matrices (rank 0 is 1x1,
// rank 1 of length n is 1xn). Elementwise binary operations broadcast any
// extent equal to 1.

#include <cstddef>
#include <span>
#include <vector>

#include "dnahnet/tensor.hpp"

namespace dnahnet::ad {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// scale * a + shift
Tensor affine(const Tensor& a, double scale, double shift = 0.0);
Tensor broadcast_to(const Tensor& a, std::size_t rows, std::size_t cols);
Tensor reshape(const Tensor& a, Shape shape);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);

// Along the last axis.
Tensor softmax(const Tensor& a);
// gain has one entry per column.
Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps = 1e-6);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// s[t] = a[t] * s[t-1] + x[t] down the rows of x, s[-1] = 0. `a` is either
// shaped like x, a column (rows x 1) or a row (1 x cols).
Tensor scan(const Tensor& a, const Tensor& x);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
Tensor transpose(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Frobenius norm.
Tensor l2_norm(const Tensor& x);

// Mean over rows with target >= 0 of -log softmax(logits[row])[target].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

// Row-wise cosine similarity of two equally shaped matrices; result is rows x 1.
// Norms below eps are replaced by eps. Results are clamped to [-1, 1].
Tensor cosine_rows(const Tensor& a, const Tensor& b, double eps = 1e-8);

// Depthwise causal convolution: y[t,c] = bias[c] + sum_k w[k,c] * x[t-K+1+k, c].
Tensor causal_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Rotary position encoding applied per head to column pairs; row t is
// rotated as absolute position offset + t.
Tensor rotary(const Tensor& x, std::size_t heads, std::size_t offset = 0, double base = 10000.0);

// Causal multi-head softmax attention, scores scaled by 1/sqrt(head dim).
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads);

}  // namespace dnahnet::ad
