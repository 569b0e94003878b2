#pragma once

// Dense numeric kernels behind the autodiff primitives.
//
// Every kernel comes in two flavours: a plain serial reference (suffix
// _serial) that is kept deliberately simple and is used by the tests as the
// ground truth, and an OpenMP version used by the library. All buffers are
// row-major.

#include <cstddef>
#include <span>

namespace dnahnet::kernels {

enum class Trans { no, yes };

// C[m,n] = op(A) * op(B), or C += op(A) * op(B) when accumulate is set.
// op(A) is m x k, op(B) is k x n.
void gemm_serial(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                 std::span<const double> a, std::span<const double> b, std::span<double> c,
                 bool accumulate);
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate);

// Element (t, c) of a broadcastable operand lives at t * row + c * col.
struct Strides {
    std::size_t row = 0;
    std::size_t col = 0;
};

// s[t] = a[t] * s[t-1] + x[t] along rows, s[-1] = 0, independently per column.
void scan_serial(std::size_t rows, std::size_t cols, std::span<const double> a, Strides as,
                 std::span<const double> x, std::span<double> s);
void scan(std::size_t rows, std::size_t cols, std::span<const double> a, Strides as,
          std::span<const double> x, std::span<double> s);

// Reverse pass of scan. gs holds dL/ds on entry. gx receives dL/dx (overwritten),
// ga_full receives the unreduced dL/da[t,c] (overwritten, rows x cols).
void scan_backward_serial(std::size_t rows, std::size_t cols, std::span<const double> a, Strides as,
                          std::span<const double> s, std::span<const double> gs,
                          std::span<double> gx, std::span<double> ga_full);
void scan_backward(std::size_t rows, std::size_t cols, std::span<const double> a, Strides as,
                   std::span<const double> s, std::span<const double> gs, std::span<double> gx,
                   std::span<double> ga_full);

// Multi-head causal softmax attention over [L, D] inputs split into `heads`
// column groups. lse receives the per-(head, row) log-sum-exp of the scaled
// scores ([heads, L]) so the backward pass can rebuild the probabilities.
void attention_forward_serial(std::size_t len, std::size_t dim, std::size_t heads,
                              std::span<const double> q, std::span<const double> k,
                              std::span<const double> v, std::span<double> out,
                              std::span<double> lse);
void attention_forward(std::size_t len, std::size_t dim, std::size_t heads,
                       std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<double> out, std::span<double> lse);

// Accumulates (+=) into gq, gk, gv.
void attention_backward_serial(std::size_t len, std::size_t dim, std::size_t heads,
                               std::span<const double> q, std::span<const double> k,
                               std::span<const double> v, std::span<const double> out,
                               std::span<const double> lse, std::span<const double> gout,
                               std::span<double> gq, std::span<double> gk, std::span<double> gv);
void attention_backward(std::size_t len, std::size_t dim, std::size_t heads,
                        std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> out,
                        std::span<const double> lse, std::span<const double> gout,
                        std::span<double> gq, std::span<double> gk, std::span<double> gv);

// Output row for a single query over n cached keys and values; bit-identical
// to the matching row of attention_forward.
void attention_query(std::size_t n, std::size_t dim, std::size_t heads, std::span<const double> q_row,
                     std::span<const double> k, std::span<const double> v, std::span<double> out_row);

void set_num_threads(int n);
int max_threads();

}  // namespace dnahnet::kernels
