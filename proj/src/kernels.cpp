#include "dnahnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dnahnet::kernels {

namespace {

constexpr std::size_t kParallelWork = 1u << 15;

inline double a_at(Trans ta, std::span<const double> a, std::size_t m, std::size_t k,
                   std::size_t i, std::size_t p) {
    return ta == Trans::no ? a[i * k + p] : a[p * m + i];
}

inline double b_at(Trans tb, std::span<const double> b, std::size_t n, std::size_t k,
                   std::size_t p, std::size_t j) {
    return tb == Trans::no ? b[p * n + j] : b[j * k + p];
}

inline double dot4(const double* x, const double* y, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t p = 0;
    for (; p + 4 <= n; p += 4) {
        s0 += x[p] * y[p];
        s1 += x[p + 1] * y[p + 1];
        s2 += x[p + 2] * y[p + 2];
        s3 += x[p + 3] * y[p + 3];
    }
    for (; p < n; ++p) s0 += x[p] * y[p];
    return (s0 + s1) + (s2 + s3);
}

inline double dot_plain(const double* x, const double* y, std::size_t n) {
    double s = 0;
    for (std::size_t p = 0; p < n; ++p) s += x[p] * y[p];
    return s;
}

}  // namespace

void gemm_serial(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                 std::span<const double> a, std::span<const double> b, std::span<double> c,
                 bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t p = 0; p < k; ++p) s += a_at(ta, a, m, k, i, p) * b_at(tb, b, n, k, p, j);
            c[i * n + j] = accumulate ? c[i * n + j] + s : s;
        }
    }
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
    const bool par = m * n * k >= kParallelWork;
    const double* A = a.data();
    const double* B = b.data();
    double* C = c.data();
    const auto im = static_cast<std::ptrdiff_t>(m);

    if (ta == Trans::no && tb == Trans::no) {
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t ii = 0; ii < im; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            double* crow = C + i * n;
            if (!accumulate) std::fill(crow, crow + n, 0.0);
            const double* arow = A + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = arow[p];
                if (aip == 0.0) continue;
                const double* brow = B + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        }
    } else if (ta == Trans::no && tb == Trans::yes) {
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t ii = 0; ii < im; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const double* arow = A + i * k;
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double s = dot4(arow, B + j * k, k);
                crow[j] = accumulate ? crow[j] + s : s;
            }
        }
    } else if (ta == Trans::yes && tb == Trans::no) {
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t ii = 0; ii < im; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            double* crow = C + i * n;
            if (!accumulate) std::fill(crow, crow + n, 0.0);
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = A[p * m + i];
                if (aip == 0.0) continue;
                const double* brow = B + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        }
    } else {
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t ii = 0; ii < im; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0;
                for (std::size_t p = 0; p < k; ++p) s += A[p * m + i] * B[j * k + p];
                C[i * n + j] = accumulate ? C[i * n + j] + s : s;
            }
        }
    }
}

void scan_serial(std::size_t rows, std::size_t cols, std::span<const double> a, Strides as,
                 std::span<const double> x, std::span<double> s) {
    for (std::size_t c = 0; c < cols; ++c) {
        double prev = 0;
        for (std::size_t t = 0; t < rows; ++t) {
            prev = a[t * as.row + c * as.col] * prev + x[t * cols + c];
            s[t * cols + c] = prev;
        }
    }
}

void scan(std::size_t rows, std::size_t cols, std::span<const double> a, Strides as,
          std::span<const double> x, std::span<double> s) {
    // Column blocks are independent; inside a block the sweep runs row by row so
    // the inner loop stays contiguous. Per column the operation order matches
    // the serial reference exactly.
    if (rows == 0) return;
    constexpr std::size_t kBlock = 64;
    const std::size_t nblocks = (cols + kBlock - 1) / kBlock;
    const bool par = nblocks > 1 && rows * cols >= kParallelWork;
    const double* A = a.data();
    const double* X = x.data();
    double* S = s.data();
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(nblocks); ++bb) {
        const std::size_t c0 = static_cast<std::size_t>(bb) * kBlock;
        const std::size_t c1 = std::min(cols, c0 + kBlock);
        for (std::size_t c = c0; c < c1; ++c) S[c] = X[c];
        for (std::size_t t = 1; t < rows; ++t) {
            const double* arow = A + t * as.row;
            const double* xrow = X + t * cols;
            const double* prev = S + (t - 1) * cols;
            double* cur = S + t * cols;
            if (as.col == 0) {
                const double at = arow[0];
                for (std::size_t c = c0; c < c1; ++c) cur[c] = at * prev[c] + xrow[c];
            } else {
                for (std::size_t c = c0; c < c1; ++c) cur[c] = arow[c * as.col] * prev[c] + xrow[c];
            }
        }
    }
}

void scan_backward_serial(std::size_t rows, std::size_t cols, std::span<const double> a, Strides as,
                          std::span<const double> s, std::span<const double> gs,
                          std::span<double> gx, std::span<double> ga_full) {
    for (std::size_t c = 0; c < cols; ++c) {
        double carry = 0;
        for (std::size_t t = rows; t-- > 0;) {
            const double g = gs[t * cols + c] + carry;
            gx[t * cols + c] = g;
            ga_full[t * cols + c] = t > 0 ? g * s[(t - 1) * cols + c] : 0.0;
            carry = a[t * as.row + c * as.col] * g;
        }
    }
}

void scan_backward(std::size_t rows, std::size_t cols, std::span<const double> a, Strides as,
                   std::span<const double> s, std::span<const double> gs, std::span<double> gx,
                   std::span<double> ga_full) {
    if (rows == 0) return;
    std::vector<double> carry(cols, 0.0);
    for (std::size_t t = rows; t-- > 0;) {
        const double* arow = a.data() + t * as.row;
        const double* gsrow = gs.data() + t * cols;
        double* gxrow = gx.data() + t * cols;
        double* garow = ga_full.data() + t * cols;
        const double* sprev = t > 0 ? s.data() + (t - 1) * cols : nullptr;
        for (std::size_t c = 0; c < cols; ++c) {
            const double g = gsrow[c] + carry[c];
            gxrow[c] = g;
            garow[c] = sprev ? g * sprev[c] : 0.0;
            carry[c] = arow[c * as.col] * g;
        }
    }
}

namespace {

// One head of one query row against keys 0..n-1. Returns the log-sum-exp.
template <bool Serial>
double attend_row(const double* qi, const double* k, const double* v, std::size_t n, std::size_t dim,
                  std::size_t off, std::size_t dh, double scale, double* w, double* oi) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        const double* kj = k + j * dim + off;
        w[j] = scale * (Serial ? dot_plain(qi, kj, dh) : dot4(qi, kj, dh));
        mx = std::max(mx, w[j]);
    }
    double sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
        w[j] = std::exp(w[j] - mx);
        sum += w[j];
    }
    std::fill(oi, oi + dh, 0.0);
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) {
        const double pj = w[j] * inv;
        const double* vj = v + j * dim + off;
        for (std::size_t d = 0; d < dh; ++d) oi[d] += pj * vj[d];
    }
    return mx + std::log(sum);
}

template <bool Serial>
void attention_forward_impl(std::size_t len, std::size_t dim, std::size_t heads,
                            std::span<const double> q, std::span<const double> k,
                            std::span<const double> v, std::span<double> out,
                            std::span<double> lse) {
    const std::size_t dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto ih = static_cast<std::ptrdiff_t>(heads);
    const bool par = !Serial && heads > 1 && len * len * dim >= kParallelWork;
#pragma omp parallel if (par)
    {
        std::vector<double> w(len);
#pragma omp for schedule(static)
        for (std::ptrdiff_t hh = 0; hh < ih; ++hh) {
            const std::size_t off = static_cast<std::size_t>(hh) * dh;
            for (std::size_t i = 0; i < len; ++i) {
                lse[static_cast<std::size_t>(hh) * len + i] =
                    attend_row<Serial>(q.data() + i * dim + off, k.data(), v.data(), i + 1, dim, off, dh, scale,
                                       w.data(), out.data() + i * dim + off);
            }
        }
    }
}

template <bool Serial>
void attention_backward_impl(std::size_t len, std::size_t dim, std::size_t heads,
                             std::span<const double> q, std::span<const double> k,
                             std::span<const double> v, std::span<const double> out,
                             std::span<const double> lse, std::span<const double> gout,
                             std::span<double> gq, std::span<double> gk, std::span<double> gv) {
    const std::size_t dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto ih = static_cast<std::ptrdiff_t>(heads);
    const bool par = !Serial && heads > 1 && len * len * dim >= kParallelWork;
    auto dot = [](const double* x, const double* y, std::size_t n) {
        return Serial ? dot_plain(x, y, n) : dot4(x, y, n);
    };
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t hh = 0; hh < ih; ++hh) {
        const std::size_t off = static_cast<std::size_t>(hh) * dh;
        for (std::size_t i = 0; i < len; ++i) {
            const double* qi = q.data() + i * dim + off;
            const double* goi = gout.data() + i * dim + off;
            const double delta = dot(goi, out.data() + i * dim + off, dh);
            const double l = lse[static_cast<std::size_t>(hh) * len + i];
            double* gqi = gq.data() + i * dim + off;
            for (std::size_t j = 0; j <= i; ++j) {
                const double* kj = k.data() + j * dim + off;
                const double* vj = v.data() + j * dim + off;
                const double p = std::exp(scale * dot(qi, kj, dh) - l);
                const double dp = dot(goi, vj, dh);
                const double ds = p * (dp - delta) * scale;
                double* gkj = gk.data() + j * dim + off;
                double* gvj = gv.data() + j * dim + off;
                for (std::size_t d = 0; d < dh; ++d) {
                    gvj[d] += p * goi[d];
                    gqi[d] += ds * kj[d];
                    gkj[d] += ds * qi[d];
                }
            }
        }
    }
}

}  // namespace

void attention_forward_serial(std::size_t len, std::size_t dim, std::size_t heads,
                              std::span<const double> q, std::span<const double> k,
                              std::span<const double> v, std::span<double> out,
                              std::span<double> lse) {
    attention_forward_impl<true>(len, dim, heads, q, k, v, out, lse);
}

void attention_forward(std::size_t len, std::size_t dim, std::size_t heads,
                       std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<double> out, std::span<double> lse) {
    attention_forward_impl<false>(len, dim, heads, q, k, v, out, lse);
}

void attention_backward_serial(std::size_t len, std::size_t dim, std::size_t heads,
                               std::span<const double> q, std::span<const double> k,
                               std::span<const double> v, std::span<const double> out,
                               std::span<const double> lse, std::span<const double> gout,
                               std::span<double> gq, std::span<double> gk, std::span<double> gv) {
    attention_backward_impl<true>(len, dim, heads, q, k, v, out, lse, gout, gq, gk, gv);
}

void attention_backward(std::size_t len, std::size_t dim, std::size_t heads,
                        std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> out,
                        std::span<const double> lse, std::span<const double> gout,
                        std::span<double> gq, std::span<double> gk, std::span<double> gv) {
    attention_backward_impl<false>(len, dim, heads, q, k, v, out, lse, gout, gq, gk, gv);
}

void attention_query(std::size_t n, std::size_t dim, std::size_t heads, std::span<const double> q_row,
                     std::span<const double> k, std::span<const double> v, std::span<double> out_row) {
    const std::size_t dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> w(n);
    for (std::size_t hh = 0; hh < heads; ++hh) {
        const std::size_t off = hh * dh;
        attend_row<false>(q_row.data() + off, k.data(), v.data(), n, dim, off, dh, scale, w.data(),
                          out_row.data() + off);
    }
}

void set_num_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace dnahnet::kernels
