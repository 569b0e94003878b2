#include <cmath>
#include <tuple>
#include <vector>

#include "dnahnet/kernels.hpp"
#include "dnahnet/random.hpp"
#include "doctest.h"

using namespace dnahnet;
using kernels::Trans;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = 2.0 * uniform01(rng) - 1.0;
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("gemm matches the serial reference for every transpose combination") {
    Rng rng(7);
    for (auto ta : {Trans::no, Trans::yes}) {
        for (auto tb : {Trans::no, Trans::yes}) {
            for (auto [m, n, k] : {std::tuple{1, 1, 1}, std::tuple{5, 3, 7}, std::tuple{64, 48, 40}}) {
                const auto a = random_vec(static_cast<std::size_t>(m * k), rng);
                const auto b = random_vec(static_cast<std::size_t>(k * n), rng);
                auto c0 = random_vec(static_cast<std::size_t>(m * n), rng);
                auto c1 = c0;
                for (bool acc : {false, true}) {
                    kernels::gemm_serial(ta, tb, m, n, k, a, b, c0, acc);
                    kernels::gemm(ta, tb, m, n, k, a, b, c1, acc);
                    CHECK(max_abs_diff(c0, c1) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("scan equals a naive sequential loop") {
    Rng rng(11);
    const std::size_t rows = 37, cols = 130;
    const auto x = random_vec(rows * cols, rng);
    const auto a_full = random_vec(rows * cols, rng);
    const auto a_col = random_vec(rows, rng);
    const auto a_row = random_vec(cols, rng);

    struct Case {
        const std::vector<double>* a;
        kernels::Strides st;
    };
    for (auto c : {Case{&a_full, {cols, 1}}, Case{&a_col, {1, 0}}, Case{&a_row, {0, 1}}}) {
        std::vector<double> naive(rows * cols), s0(rows * cols), s1(rows * cols);
        for (std::size_t j = 0; j < cols; ++j) {
            double prev = 0;
            for (std::size_t t = 0; t < rows; ++t) {
                const double at = (*c.a)[t * c.st.row + j * c.st.col];
                prev = at * prev + x[t * cols + j];
                naive[t * cols + j] = prev;
            }
        }
        kernels::scan_serial(rows, cols, *c.a, c.st, x, s0);
        kernels::scan(rows, cols, *c.a, c.st, x, s1);
        CHECK(max_abs_diff(naive, s0) <= 1e-12);
        CHECK(max_abs_diff(naive, s1) <= 1e-12);

        const auto gs = random_vec(rows * cols, rng);
        std::vector<double> gx0(rows * cols), ga0(rows * cols), gx1(rows * cols), ga1(rows * cols);
        kernels::scan_backward_serial(rows, cols, *c.a, c.st, s0, gs, gx0, ga0);
        kernels::scan_backward(rows, cols, *c.a, c.st, s0, gs, gx1, ga1);
        CHECK(max_abs_diff(gx0, gx1) <= 1e-12);
        CHECK(max_abs_diff(ga0, ga1) <= 1e-12);
    }
}

TEST_CASE("attention kernels agree with the serial reference") {
    Rng rng(3);
    for (auto [len, dim, heads] : {std::tuple{1, 4, 1}, std::tuple{9, 8, 2}, std::tuple{40, 24, 3}}) {
        const auto n = static_cast<std::size_t>(len * dim);
        const auto q = random_vec(n, rng), k = random_vec(n, rng), v = random_vec(n, rng);
        std::vector<double> o0(n), o1(n), l0(static_cast<std::size_t>(heads * len)), l1(l0.size());
        kernels::attention_forward_serial(len, dim, heads, q, k, v, o0, l0);
        kernels::attention_forward(len, dim, heads, q, k, v, o1, l1);
        CHECK(max_abs_diff(o0, o1) < 1e-12);
        CHECK(max_abs_diff(l0, l1) < 1e-12);

        const auto g = random_vec(n, rng);
        std::vector<double> gq0(n), gk0(n), gv0(n), gq1(n), gk1(n), gv1(n);
        kernels::attention_backward_serial(len, dim, heads, q, k, v, o0, l0, g, gq0, gk0, gv0);
        kernels::attention_backward(len, dim, heads, q, k, v, o0, l0, g, gq1, gk1, gv1);
        CHECK(max_abs_diff(gq0, gq1) < 1e-12);
        CHECK(max_abs_diff(gk0, gk1) < 1e-12);
        CHECK(max_abs_diff(gv0, gv1) < 1e-12);
    }
}

TEST_CASE("attention over a single key returns the value row") {
    const std::vector<double> q = {0.3, -1.0}, k = {2.0, 0.5}, v = {4.0, -7.0};
    std::vector<double> o(2), lse(1);
    kernels::attention_forward(1, 2, 1, q, k, v, o, lse);
    CHECK(o[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(o[1] == doctest::Approx(-7.0).epsilon(1e-15));
}
