#include "dnahnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dnahnet/errors.hpp"
#include "dnahnet/kernels.hpp"

namespace dnahnet::ad {

namespace {

struct Dims {
    std::size_t r = 1;
    std::size_t c = 1;
};

Dims dims_of(const Tensor& t) { return {t.rows(), t.cols()}; }

std::span<double> grad_of(Node& self, std::size_t i) {
    auto& p = self.parents[i];
    if (!p || !p->requires_grad) return {};
    return p->grad_buffer();
}

std::span<const double> value_of(Node& self, std::size_t i) { return self.parents[i]->value; }

std::string where(const char* op, const Tensor& a, const Tensor& b) {
    return std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
           shape_string(b.shape());
}

void require_matrix(const char* op, const Tensor& t) {
    if (!t.defined()) throw ShapeError(std::string(op) + ": undefined operand");
}

// Shape of a broadcast elementwise result.
Shape broadcast_shape(const char* op, const Tensor& a, const Tensor& b, Dims& out) {
    const Dims da = dims_of(a);
    const Dims db = dims_of(b);
    auto pick = [&](std::size_t x, std::size_t y) -> std::size_t {
        if (x == y || y == 1) return x;
        if (x == 1) return y;
        throw ShapeError(where(op, a, b));
    };
    out.r = pick(da.r, db.r);
    out.c = pick(da.c, db.c);
    if (a.shape() == b.shape()) return a.shape();
    if (da.r == out.r && da.c == out.c) return a.shape();
    if (db.r == out.r && db.c == out.c) return b.shape();
    return {out.r, out.c};
}

// Index of broadcast operand element for output (i, j).
inline std::size_t bidx(const Dims& d, std::size_t i, std::size_t j) {
    return (d.r == 1 ? 0 : i) * d.c + (d.c == 1 ? 0 : j);
}

enum class BinOp { add, sub, mul };

Tensor binary(const char* name, BinOp op, const Tensor& a, const Tensor& b) {
    require_matrix(name, a);
    require_matrix(name, b);
    Dims out;
    Shape shape = broadcast_shape(name, a, b, out);
    const Dims da = dims_of(a);
    const Dims db = dims_of(b);
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> value(out.r * out.c);
    const bool same = da.r == out.r && da.c == out.c && db.r == out.r && db.c == out.c;
    if (same) {
        for (std::size_t i = 0; i < value.size(); ++i) {
            value[i] = op == BinOp::add ? av[i] + bv[i] : op == BinOp::sub ? av[i] - bv[i] : av[i] * bv[i];
        }
    } else {
        for (std::size_t i = 0; i < out.r; ++i) {
            for (std::size_t j = 0; j < out.c; ++j) {
                const double x = av[bidx(da, i, j)];
                const double y = bv[bidx(db, i, j)];
                value[i * out.c + j] = op == BinOp::add ? x + y : op == BinOp::sub ? x - y : x * y;
            }
        }
    }
    return make_result(name, std::move(shape), std::move(value), {a, b}, [op, out, da, db](Node& self) {
        auto ga = grad_of(self, 0);
        auto gb = grad_of(self, 1);
        const auto av = value_of(self, 0);
        const auto bv = value_of(self, 1);
        const auto& g = self.grad;
        for (std::size_t i = 0; i < out.r; ++i) {
            for (std::size_t j = 0; j < out.c; ++j) {
                const double gij = g[i * out.c + j];
                const std::size_t ia = bidx(da, i, j);
                const std::size_t ib = bidx(db, i, j);
                switch (op) {
                    case BinOp::add:
                        if (!ga.empty()) ga[ia] += gij;
                        if (!gb.empty()) gb[ib] += gij;
                        break;
                    case BinOp::sub:
                        if (!ga.empty()) ga[ia] += gij;
                        if (!gb.empty()) gb[ib] -= gij;
                        break;
                    case BinOp::mul:
                        if (!ga.empty()) ga[ia] += gij * bv[ib];
                        if (!gb.empty()) gb[ib] += gij * av[ia];
                        break;
                }
            }
        }
    });
}

template <typename F, typename DF>
Tensor unary(const char* name, const Tensor& a, F f, DF df) {
    require_matrix(name, a);
    const auto av = a.data();
    std::vector<double> value(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) value[i] = f(av[i]);
    return make_result(name, a.shape(), std::move(value), {a}, [df](Node& self) {
        auto ga = grad_of(self, 0);
        const auto x = value_of(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * df(x[i], self.value[i]);
    });
}

inline double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix("matmul", a);
    require_matrix("matmul", b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) throw ShapeError(where("matmul", a, b));
    std::vector<double> value(m * n);
    kernels::gemm(kernels::Trans::no, kernels::Trans::no, m, n, k, a.data(), b.data(), value, false);
    return make_result("matmul", {m, n}, std::move(value), {a, b}, [m, n, k](Node& self) {
        auto ga = grad_of(self, 0);
        auto gb = grad_of(self, 1);
        if (!ga.empty()) {
            kernels::gemm(kernels::Trans::no, kernels::Trans::yes, m, k, n, self.grad,
                          value_of(self, 1), ga, true);
        }
        if (!gb.empty()) {
            kernels::gemm(kernels::Trans::yes, kernels::Trans::no, k, n, m, value_of(self, 0),
                          self.grad, gb, true);
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinOp::mul, a, b); }

Tensor affine(const Tensor& a, double scale, double shift) {
    return unary(
        "affine", a, [scale, shift](double x) { return scale * x + shift; },
        [scale](double, double) { return scale; });
}

Tensor broadcast_to(const Tensor& a, std::size_t rows, std::size_t cols) {
    return add(a, Tensor::zeros({rows, cols}));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        throw ShapeError("reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
    }
    std::vector<double> value(a.data().begin(), a.data().end());
    return make_result("reshape", std::move(shape), std::move(value), {a}, [](Node& self) {
        auto ga = grad_of(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    });
}

Tensor exp(const Tensor& a) {
    return unary(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
    return unary(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        "sigmoid", a, [](double x) { return stable_sigmoid(x); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& a) {
    return unary(
        "silu", a, [](double x) { return x * stable_sigmoid(x); },
        [](double x, double) {
            const double s = stable_sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Tensor softmax(const Tensor& a) {
    const std::size_t r = a.rows(), c = a.cols();
    const auto av = a.data();
    std::vector<double> value(av.size());
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = av.data() + i * c;
        double* y = value.data() + i * c;
        const double mx = *std::max_element(x, x + c);
        double s = 0;
        for (std::size_t j = 0; j < c; ++j) s += (y[j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < c; ++j) y[j] /= s;
    }
    return make_result("softmax", a.shape(), std::move(value), {a}, [r, c](Node& self) {
        auto ga = grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.value.data() + i * c;
            const double* g = self.grad.data() + i * c;
            double dot = 0;
            for (std::size_t j = 0; j < c; ++j) dot += g[j] * y[j];
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[j] * (g[j] - dot);
        }
    });
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (gain.size() != c) throw ShapeError(where("rms_norm", x, gain));
    const auto xv = x.data();
    const auto gv = gain.data();
    std::vector<double> value(xv.size());
    std::vector<double> inv(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = xv.data() + i * c;
        double ms = 0;
        for (std::size_t j = 0; j < c; ++j) ms += xi[j] * xi[j];
        inv[i] = 1.0 / std::sqrt(ms / static_cast<double>(c) + eps);
        for (std::size_t j = 0; j < c; ++j) value[i * c + j] = xi[j] * inv[i] * gv[j];
    }
    return make_result("rms_norm", x.shape(), std::move(value), {x, gain},
                       [r, c, inv = std::move(inv)](Node& self) {
                           auto gx = grad_of(self, 0);
                           auto gg = grad_of(self, 1);
                           const auto xv = value_of(self, 0);
                           const auto gv = value_of(self, 1);
                           const double n = static_cast<double>(c);
                           for (std::size_t i = 0; i < r; ++i) {
                               const double* xi = xv.data() + i * c;
                               const double* g = self.grad.data() + i * c;
                               const double ri = inv[i];
                               if (!gg.empty()) {
                                   for (std::size_t j = 0; j < c; ++j) gg[j] += g[j] * xi[j] * ri;
                               }
                               if (!gx.empty()) {
                                   double dot = 0;
                                   for (std::size_t j = 0; j < c; ++j) dot += g[j] * gv[j] * xi[j];
                                   const double k = ri * ri * ri * dot / n;
                                   for (std::size_t j = 0; j < c; ++j) {
                                       gx[i * c + j] += ri * g[j] * gv[j] - k * xi[j];
                                   }
                               }
                           }
                       });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (gain.size() != c || bias.size() != c) throw ShapeError(where("layer_norm", x, gain));
    const auto xv = x.data();
    const auto gv = gain.data();
    const auto bv = bias.data();
    std::vector<double> value(xv.size());
    std::vector<double> xhat(xv.size());
    std::vector<double> inv(r);
    const double n = static_cast<double>(c);
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = xv.data() + i * c;
        double mu = 0;
        for (std::size_t j = 0; j < c; ++j) mu += xi[j];
        mu /= n;
        double var = 0;
        for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
        var /= n;
        inv[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            xhat[i * c + j] = (xi[j] - mu) * inv[i];
            value[i * c + j] = xhat[i * c + j] * gv[j] + bv[j];
        }
    }
    return make_result("layer_norm", x.shape(), std::move(value), {x, gain, bias},
                       [r, c, n, inv = std::move(inv), xhat = std::move(xhat)](Node& self) {
                           auto gx = grad_of(self, 0);
                           auto gg = grad_of(self, 1);
                           auto gb = grad_of(self, 2);
                           const auto gv = value_of(self, 1);
                           for (std::size_t i = 0; i < r; ++i) {
                               const double* g = self.grad.data() + i * c;
                               const double* xh = xhat.data() + i * c;
                               double m1 = 0, m2 = 0;
                               for (std::size_t j = 0; j < c; ++j) {
                                   if (!gg.empty()) gg[j] += g[j] * xh[j];
                                   if (!gb.empty()) gb[j] += g[j];
                                   const double d = g[j] * gv[j];
                                   m1 += d;
                                   m2 += d * xh[j];
                               }
                               if (gx.empty()) continue;
                               m1 /= n;
                               m2 /= n;
                               for (std::size_t j = 0; j < c; ++j) {
                                   gx[i * c + j] += inv[i] * (g[j] * gv[j] - m1 - xh[j] * m2);
                               }
                           }
                       });
}

Tensor scan(const Tensor& a, const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    const Dims da = dims_of(a);
    kernels::Strides as;
    if (da.r == r && da.c == c) {
        as = {c, 1};
    } else if (da.r == r && da.c == 1) {
        as = {1, 0};
    } else if (da.r == 1 && da.c == c) {
        as = {0, 1};
    } else {
        throw ShapeError(where("scan", a, x));
    }
    std::vector<double> value(r * c);
    kernels::scan(r, c, a.data(), as, x.data(), value);
    return make_result("scan", x.shape(), std::move(value), {a, x}, [r, c, as, da](Node& self) {
        auto ga = grad_of(self, 0);
        auto gx = grad_of(self, 1);
        std::vector<double> gxs(r * c), gaf(r * c);
        kernels::scan_backward(r, c, value_of(self, 0), as, self.value, self.grad, gxs, gaf);
        if (!gx.empty()) {
            for (std::size_t i = 0; i < gxs.size(); ++i) gx[i] += gxs[i];
        }
        if (!ga.empty()) {
            for (std::size_t t = 0; t < r; ++t) {
                for (std::size_t j = 0; j < c; ++j) ga[bidx(da, t, j)] += gaf[t * c + j];
            }
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no operands");
    const std::size_t c = parts.front().cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) throw ShapeError(where("concat_rows", parts.front(), p));
        r += p.rows();
    }
    std::vector<double> value;
    value.reserve(r * c);
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(value.size());
        value.insert(value.end(), p.data().begin(), p.data().end());
    }
    return make_result("concat_rows", {r, c}, std::move(value), parts,
                       [offsets = std::move(offsets)](Node& self) {
                           for (std::size_t i = 0; i < self.parents.size(); ++i) {
                               auto g = grad_of(self, i);
                               for (std::size_t j = 0; j < g.size(); ++j) g[j] += self.grad[offsets[i] + j];
                           }
                       });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no operands");
    const std::size_t r = parts.front().rows();
    std::size_t c = 0;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        if (p.rows() != r) throw ShapeError(where("concat_cols", parts.front(), p));
        widths.push_back(p.cols());
        c += p.cols();
    }
    std::vector<double> value(r * c);
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto pv = parts[k].data();
        for (std::size_t i = 0; i < r; ++i) {
            std::copy_n(pv.data() + i * widths[k], widths[k], value.data() + i * c + off);
        }
        off += widths[k];
    }
    return make_result("concat_cols", {r, c}, std::move(value), parts,
                       [r, c, widths = std::move(widths)](Node& self) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < self.parents.size(); ++k) {
                               auto g = grad_of(self, k);
                               if (!g.empty()) {
                                   for (std::size_t i = 0; i < r; ++i) {
                                       for (std::size_t j = 0; j < widths[k]; ++j) {
                                           g[i * widths[k] + j] += self.grad[i * c + off + j];
                                       }
                                   }
                               }
                               off += widths[k];
                           }
                       });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    const std::size_t c = x.cols();
    if (begin > end || end > x.rows()) {
        throw ShapeError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") of " + shape_string(x.shape()));
    }
    const auto xv = x.data();
    std::vector<double> value(xv.begin() + begin * c, xv.begin() + end * c);
    return make_result("slice_rows", {end - begin, c}, std::move(value), {x}, [begin, c](Node& self) {
        auto g = grad_of(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * c + i] += self.grad[i];
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
    const std::size_t r = x.rows(), c = x.cols();
    if (begin > end || end > c) {
        throw ShapeError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") of " + shape_string(x.shape()));
    }
    const std::size_t w = end - begin;
    const auto xv = x.data();
    std::vector<double> value(r * w);
    for (std::size_t i = 0; i < r; ++i) std::copy_n(xv.data() + i * c + begin, w, value.data() + i * w);
    return make_result("slice_cols", {r, w}, std::move(value), {x}, [r, c, w, begin](Node& self) {
        auto g = grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
        }
    });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
    const std::size_t c = x.cols(), r = x.rows();
    const auto xv = x.data();
    std::vector<double> value(index.size() * c);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= r) throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of range");
        std::copy_n(xv.data() + index[i] * c, c, value.data() + i * c);
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    const std::size_t n = idx.size();
    return make_result("gather_rows", {n, c}, std::move(value), {x}, [c, idx = std::move(idx)](Node& self) {
        auto g = grad_of(self, 0);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += self.grad[i * c + j];
        }
    });
}

Tensor transpose(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    const auto xv = x.data();
    std::vector<double> value(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) value[j * r + i] = xv[i * c + j];
    }
    return make_result("transpose", {c, r}, std::move(value), {x}, [r, c](Node& self) {
        auto g = grad_of(self, 0);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
        }
    });
}

Tensor sum(const Tensor& x) {
    double s = 0;
    for (double v : x.data()) s += v;
    return make_result("sum", {}, {s}, {x}, [](Node& self) {
        auto g = grad_of(self, 0);
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw ShapeError("mean of empty tensor");
    const double n = static_cast<double>(x.size());
    double s = 0;
    for (double v : x.data()) s += v;
    return make_result("mean", {}, {s / n}, {x}, [n](Node& self) {
        auto g = grad_of(self, 0);
        for (auto& v : g) v += self.grad[0] / n;
    });
}

Tensor l2_norm(const Tensor& x) {
    double s = 0;
    for (double v : x.data()) s += v * v;
    const double norm = std::sqrt(s);
    return make_result("l2_norm", {}, {norm}, {x}, [](Node& self) {
        auto g = grad_of(self, 0);
        const double nrm = self.value[0];
        if (nrm == 0.0) return;
        const auto xv = value_of(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * xv[i] / nrm;
    });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
    const std::size_t r = logits.rows(), c = logits.cols();
    if (targets.size() != r) throw ShapeError("cross_entropy: target count does not match rows");
    const auto lv = logits.data();
    std::vector<double> prob(r * c, 0.0);
    double total = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < r; ++i) {
        if (targets[i] < 0) continue;
        if (static_cast<std::size_t>(targets[i]) >= c) throw ShapeError("cross_entropy: target out of range");
        const double* x = lv.data() + i * c;
        const double mx = *std::max_element(x, x + c);
        double s = 0;
        for (std::size_t j = 0; j < c; ++j) s += (prob[i * c + j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < c; ++j) prob[i * c + j] /= s;
        total += mx + std::log(s) - x[targets[i]];
        ++count;
    }
    const double n = count ? static_cast<double>(count) : 1.0;
    std::vector<int> tg(targets.begin(), targets.end());
    return make_result("cross_entropy", {}, {total / n}, {logits},
                       [r, c, n, tg = std::move(tg), prob = std::move(prob)](Node& self) {
                           auto g = grad_of(self, 0);
                           const double scale = self.grad[0] / n;
                           for (std::size_t i = 0; i < r; ++i) {
                               if (tg[i] < 0) continue;
                               for (std::size_t j = 0; j < c; ++j) {
                                   const double y = static_cast<int>(j) == tg[i] ? 1.0 : 0.0;
                                   g[i * c + j] += scale * (prob[i * c + j] - y);
                               }
                           }
                       });
}

Tensor cosine_rows(const Tensor& a, const Tensor& b, double eps) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(where("cosine_rows", a, b));
    const std::size_t r = a.rows(), c = a.cols();
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> value(r), na(r), nb(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = av.data() + i * c;
        const double* y = bv.data() + i * c;
        double dot = 0, sx = 0, sy = 0;
        for (std::size_t j = 0; j < c; ++j) {
            dot += x[j] * y[j];
            sx += x[j] * x[j];
            sy += y[j] * y[j];
        }
        na[i] = std::max(std::sqrt(sx), eps);
        nb[i] = std::max(std::sqrt(sy), eps);
        value[i] = std::clamp(dot / (na[i] * nb[i]), -1.0, 1.0);
    }
    return make_result("cosine_rows", {r, 1}, std::move(value), {a, b},
                       [r, c, eps, na = std::move(na), nb = std::move(nb)](Node& self) {
                           auto ga = grad_of(self, 0);
                           auto gb = grad_of(self, 1);
                           const auto av = value_of(self, 0);
                           const auto bv = value_of(self, 1);
                           for (std::size_t i = 0; i < r; ++i) {
                               const double g = self.grad[i];
                               if (g == 0.0) continue;
                               const double* x = av.data() + i * c;
                               const double* y = bv.data() + i * c;
                               double dot = 0;
                               for (std::size_t j = 0; j < c; ++j) dot += x[j] * y[j];
                               const double denom = na[i] * nb[i];
                               const double cs = dot / denom;
                               // A norm clamped at eps is locally constant.
                               const double ka = na[i] > eps ? cs / (na[i] * na[i]) : 0.0;
                               const double kb = nb[i] > eps ? cs / (nb[i] * nb[i]) : 0.0;
                               for (std::size_t j = 0; j < c; ++j) {
                                   if (!ga.empty()) ga[i * c + j] += g * (y[j] / denom - ka * x[j]);
                                   if (!gb.empty()) gb[i * c + j] += g * (x[j] / denom - kb * y[j]);
                               }
                           }
                       });
}

Tensor causal_conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    const std::size_t L = x.rows(), C = x.cols(), K = weight.rows();
    if (weight.cols() != C || bias.size() != C) throw ShapeError(where("causal_conv1d", x, weight));
    const auto xv = x.data();
    const auto wv = weight.data();
    const auto bv = bias.data();
    std::vector<double> value(L * C);
    for (std::size_t t = 0; t < L; ++t) {
        double* y = value.data() + t * C;
        std::copy_n(bv.data(), C, y);
        for (std::size_t k = 0; k < K; ++k) {
            // input row t - (K-1) + k
            if (t + k + 1 < K) continue;
            const std::size_t src = t + k + 1 - K;
            const double* xs = xv.data() + src * C;
            const double* wk = wv.data() + k * C;
            for (std::size_t j = 0; j < C; ++j) y[j] += wk[j] * xs[j];
        }
    }
    return make_result("causal_conv1d", {L, C}, std::move(value), {x, weight, bias}, [L, C, K](Node& self) {
        auto gx = grad_of(self, 0);
        auto gw = grad_of(self, 1);
        auto gb = grad_of(self, 2);
        const auto xv = value_of(self, 0);
        const auto wv = value_of(self, 1);
        for (std::size_t t = 0; t < L; ++t) {
            const double* g = self.grad.data() + t * C;
            if (!gb.empty()) {
                for (std::size_t j = 0; j < C; ++j) gb[j] += g[j];
            }
            for (std::size_t k = 0; k < K; ++k) {
                if (t + k + 1 < K) continue;
                const std::size_t src = t + k + 1 - K;
                for (std::size_t j = 0; j < C; ++j) {
                    if (!gw.empty()) gw[k * C + j] += g[j] * xv[src * C + j];
                    if (!gx.empty()) gx[src * C + j] += g[j] * wv[k * C + j];
                }
            }
        }
    });
}

Tensor rotary(const Tensor& x, std::size_t heads, std::size_t offset, double base) {
    const std::size_t L = x.rows(), D = x.cols();
    if (heads == 0 || D % heads != 0) throw ShapeError("rotary: heads must divide the model dimension");
    const std::size_t dh = D / heads;
    const std::size_t pairs = dh / 2;
    std::vector<double> cs(L * pairs), sn(L * pairs);
    for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t i = 0; i < pairs; ++i) {
            const double freq = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(dh));
            const double ang = static_cast<double>(offset + t) * freq;
            cs[t * pairs + i] = std::cos(ang);
            sn[t * pairs + i] = std::sin(ang);
        }
    }
    const auto xv = x.data();
    std::vector<double> value(xv.begin(), xv.end());
    for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < pairs; ++i) {
                const std::size_t j0 = t * D + h * dh + 2 * i;
                const double c = cs[t * pairs + i], s = sn[t * pairs + i];
                value[j0] = xv[j0] * c - xv[j0 + 1] * s;
                value[j0 + 1] = xv[j0] * s + xv[j0 + 1] * c;
            }
        }
    }
    return make_result("rotary", x.shape(), std::move(value), {x},
                       [L, D, heads, dh, pairs, cs = std::move(cs), sn = std::move(sn)](Node& self) {
                           auto g = grad_of(self, 0);
                           const auto& go = self.grad;
                           for (std::size_t t = 0; t < L; ++t) {
                               for (std::size_t h = 0; h < heads; ++h) {
                                   const std::size_t b = t * D + h * dh;
                                   for (std::size_t i = 0; i < pairs; ++i) {
                                       const std::size_t j0 = b + 2 * i;
                                       const double c = cs[t * pairs + i], s = sn[t * pairs + i];
                                       g[j0] += go[j0] * c + go[j0 + 1] * s;
                                       g[j0 + 1] += -go[j0] * s + go[j0 + 1] * c;
                                   }
                                   for (std::size_t j = 2 * pairs; j < dh; ++j) g[b + j] += go[b + j];
                               }
                           }
                       });
}

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads) {
    const std::size_t L = q.rows(), D = q.cols();
    if (k.rows() != L || v.rows() != L || k.cols() != D || v.cols() != D) {
        throw ShapeError(where("causal_attention", q, k));
    }
    if (heads == 0 || D % heads != 0) throw ShapeError("causal_attention: heads must divide the model dimension");
    std::vector<double> value(L * D);
    std::vector<double> lse(heads * L);
    kernels::attention_forward(L, D, heads, q.data(), k.data(), v.data(), value, lse);
    return make_result("causal_attention", {L, D}, std::move(value), {q, k, v},
                       [L, D, heads, lse = std::move(lse)](Node& self) {
                           std::vector<double> gq(L * D, 0.0), gk(L * D, 0.0), gv(L * D, 0.0);
                           kernels::attention_backward(L, D, heads, value_of(self, 0), value_of(self, 1),
                                                       value_of(self, 2), self.value, lse, self.grad, gq,
                                                       gk, gv);
                           auto add_into = [](std::span<double> dst, const std::vector<double>& src) {
                               for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
                           };
                           add_into(grad_of(self, 0), gq);
                           add_into(grad_of(self, 1), gk);
                           add_into(grad_of(self, 2), gv);
                       });
}

}  // namespace dnahnet::ad
