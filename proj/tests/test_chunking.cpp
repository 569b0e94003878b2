#include <cmath>
#include <vector>

#include "dnahnet/chunking.hpp"
#include "dnahnet/errors.hpp"
#include "dnahnet/gradcheck.hpp"
#include "dnahnet/ops.hpp"
#include "dnahnet/random.hpp"
#include "doctest.h"

using namespace dnahnet;
using namespace dnahnet::ad;
using namespace dnahnet::chunking;

namespace {

Tensor rand_tensor(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1, double hi = 1) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
    return Tensor::from({rows, cols}, std::move(v));
}

Tensor eye(std::size_t n) {
    auto t = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.mutable_data()[i * n + i] = 1.0;
    return t;
}

Tensor project(const Tensor& t, std::uint64_t seed) {
    Rng rng(seed);
    return sum(mul(t, rand_tensor(t.rows(), t.cols(), rng)));
}

}  // namespace

TEST_CASE("route examples") {
    auto p = route(Tensor::from({4, 2}, {1, 0, 1, 0, -1, 0, 0, 3}), eye(2), eye(2));
    REQUIRE(p.shape() == Shape{4, 1});
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == 0.0);  // same direction
    CHECK(p.data()[2] == 1.0);  // opposite
    CHECK(p.data()[3] == 0.5);  // orthogonal
    CHECK(route(Tensor::from({1, 2}, {3, 4}), eye(2), eye(2)).item() == 1.0);
    // Zero projections are guarded rather than dividing by zero.
    CHECK(route(Tensor::zeros({3, 2}), eye(2), eye(2)).data()[2] == 0.5);
}

TEST_CASE("route probabilities stay in [0, 1] under fuzzing") {
    Rng rng(8);
    auto wq = rand_tensor(6, 6, rng), wk = rand_tensor(6, 6, rng);
    for (int trial = 0; trial < 200; ++trial) {
        const double scale = std::pow(10.0, static_cast<double>(static_cast<int>(rng() % 13)) - 6.0);
        auto p = route(rand_tensor(50, 6, rng, -scale, scale), wq, wk);
        for (double v : p.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("discretize") {
    CHECK(discretize(std::vector<double>{1.0, 0.2, 0.7}) == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(discretize(std::vector<double>{1.0, 0.5}) == std::vector<std::uint8_t>{1, 0});
    CHECK(discretize(std::vector<double>{0.1, 0.2, 0.3, 0.4}) == std::vector<std::uint8_t>{1, 0, 0, 0});
}

TEST_CASE("downsample examples and brute-force filter") {
    auto h = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
    auto p = Tensor::from({3, 1}, {1.0, 0.1, 0.9});
    const std::vector<std::uint8_t> b = {1, 0, 1};
    auto ch = downsample(h, b, p);
    CHECK(std::vector<double>(ch.latents.data().begin(), ch.latents.data().end()) == std::vector<double>{1, 2, 5, 6});
    CHECK(ch.chunk_map == std::vector<std::size_t>{0, 0, 1});
    CHECK(std::vector<double>(ch.boundary_probs.data().begin(), ch.boundary_probs.data().end()) ==
          std::vector<double>{1.0, 0.9});

    const std::vector<std::uint8_t> all = {1, 1, 1};
    auto id = downsample(h, all, p);
    CHECK(id.chunk_map == std::vector<std::size_t>{0, 1, 2});
    CHECK(std::equal(id.latents.data().begin(), id.latents.data().end(), h.data().begin()));

    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t L = 1 + rng() % 30;
        auto hh = rand_tensor(L, 3, rng);
        auto pp = rand_tensor(L, 1, rng, 0, 1);
        std::vector<std::uint8_t> bb(L);
        for (auto& x : bb) x = rng() & 1;
        bb[0] = 1;
        auto c = downsample(hh, bb, pp);
        std::vector<double> expect;
        std::size_t count = 0;
        for (std::size_t t = 0; t < L; ++t) {
            if (bb[t]) {
                ++count;
                for (std::size_t j = 0; j < 3; ++j) expect.push_back(hh.at(t, j));
            }
            CHECK(c.chunk_map[t] + 1 == count);
        }
        CHECK(std::vector<double>(c.latents.data().begin(), c.latents.data().end()) == expect);
    }
    const std::vector<std::uint8_t> no_first = {0, 1, 1};
    CHECK_THROWS_AS(downsample(h, no_first, p), ShapeError);
}

TEST_CASE("smooth examples, loop oracle and gradients") {
    auto x = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto ones = Tensor::from({2, 1}, {1, 1});
    auto same = smooth(x, ones);
    CHECK(std::equal(same.data().begin(), same.data().end(), x.data().begin()));
    auto half = smooth(x, Tensor::from({2, 1}, {1, 0.5}));
    CHECK(half.at(1, 0) == 0.5 * 3 + 0.5 * 1);
    CHECK(half.at(1, 1) == 0.5 * 4 + 0.5 * 2);

    Rng rng(13);
    auto xr = rand_tensor(25, 4, rng);
    auto P = rand_tensor(25, 1, rng, 0, 1);
    auto e = smooth(xr, P);
    std::vector<double> prev(4, 0.0);
    for (std::size_t j = 0; j < 25; ++j) {
        const double pj = P.data()[j];
        for (std::size_t d = 0; d < 4; ++d) {
            prev[d] = (1 - pj) * prev[d] + pj * xr.at(j, d);
            CHECK(std::abs(e.at(j, d) - prev[d]) <= 1e-12);
        }
    }

    xr.node()->requires_grad = true;
    P.node()->requires_grad = true;
    std::vector<Tensor> in = {xr, P};
    CHECK(finite_diff_check([&] { return project(smooth(xr, P), 3); }, in).max_rel_error < 1e-6);
}

TEST_CASE("upsample forward copies chunk vectors regardless of p") {
    auto e = Tensor::from({2, 2}, {1, 2, 3, 4});
    const std::vector<std::size_t> c = {0, 0, 1};
    const std::vector<std::uint8_t> b = {1, 0, 1};
    for (auto pv : {std::vector<double>{1, 0.1, 0.9}, std::vector<double>{1, 0.4, 0.6}}) {
        auto p = Tensor::from({3, 1}, pv);
        for (auto mode : {Confidence::ste, Confidence::off}) {
            auto u = upsample(e, c, p, b, mode);
            CHECK(std::vector<double>(u.data().begin(), u.data().end()) == std::vector<double>{1, 2, 1, 2, 3, 4});
        }
    }
}

TEST_CASE("straight-through gradient to p equals the relaxed surrogate's finite difference") {
    Rng rng(21);
    const std::size_t L = 9;
    auto e = rand_tensor(4, 3, rng);
    std::vector<std::uint8_t> b = {1, 0, 1, 1, 0, 0, 1, 0, 0};
    std::vector<std::size_t> c;
    std::size_t k = 0;
    for (std::size_t t = 0; t < L; ++t) {
        if (b[t] && t > 0) ++k;
        c.push_back(k);
    }
    std::vector<double> pv(L);
    for (std::size_t t = 0; t < L; ++t) pv[t] = b[t] ? 0.6 + 0.3 * uniform01(rng) : 0.1 + 0.3 * uniform01(rng);
    auto p = Tensor::from({L, 1}, pv, true);

    backward(sum(upsample(e, c, p, b, Confidence::ste)));
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    for (std::size_t t = 0; t < L; ++t) {
        auto relaxed_at = [&](double h) {
            auto q = pv;
            q[t] += h;
            NoGradGuard g;
            return sum(upsample(e, c, Tensor::from({L, 1}, q), b, Confidence::relaxed)).item();
        };
        const double fd = (relaxed_at(1e-6) - relaxed_at(-1e-6)) / 2e-6;
        CHECK(analytic[t] == doctest::Approx(fd).epsilon(1e-8));
    }

    p.zero_grad();
    backward(sum(upsample(e, c, p, b, Confidence::off)), {});
    for (double g : p.grad()) CHECK(g == 0.0);
}

TEST_CASE("downsample then upsample with every position a boundary is the identity") {
    Rng rng(2);
    auto h = rand_tensor(7, 3, rng);
    auto p = rand_tensor(7, 1, rng, 0, 1);
    const std::vector<std::uint8_t> b(7, 1);
    auto ch = downsample(h, b, p);
    auto u = upsample(ch.latents, ch.chunk_map, p, b, Confidence::off);
    CHECK(std::equal(u.data().begin(), u.data().end(), h.data().begin()));
}

TEST_CASE("chunking stack passes the finite-difference check with the relaxed surrogate") {
    Rng rng(31);
    const std::size_t L = 14, D = 5;
    auto h = rand_tensor(L, D, rng);
    auto wq = rand_tensor(D, D, rng), wk = rand_tensor(D, D, rng);
    for (auto* t : {&h, &wq, &wk}) t->node()->requires_grad = true;
    auto f = [&] {
        auto p = route(h, wq, wk);
        const std::vector<double> pv(p.data().begin(), p.data().end());
        auto b = discretize(pv);
        auto ch = downsample(h, b, p);
        auto e = smooth(tanh(ch.latents), ch.boundary_probs);
        return project(upsample(e, ch.chunk_map, p, b, Confidence::relaxed), 9);
    };
    {
        NoGradGuard g;
        auto p = route(h, wq, wk);
        for (std::size_t t = 1; t < L; ++t) CHECK(std::abs(p.data()[t] - 0.5) > 1e-3);
    }
    std::vector<Tensor> in = {h, wq, wk};
    CHECK(finite_diff_check(f, in, {.eps = 1e-6, .coords_per_tensor = 80, .seed = 0}).max_rel_error < 1e-6);
}

TEST_CASE("ratio loss") {
    CHECK(ratio_loss_value(1, 1, 2) == 2.0);
    CHECK(ratio_loss_value(0.5, 0.5, 2) == 1.0);
    CHECK(ratio_loss_value(1.0 / 3, 1.0 / 3, 3) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ratio_loss_value(0, 0, 2) == 2.0);
    CHECK_THROWS_AS(ratio_loss_value(0.5, 0.5, 1.0), DomainError);
    CHECK_THROWS_AS(ratio_loss(0.5, Tensor::scalar(0.5), 0.5), DomainError);

    for (double R : {2.0, 3.0, 6.0}) {
        double best = 1e300, argbest = -1;
        for (int i = 0; i <= 100; ++i) {
            const double x = i / 100.0;
            const double v = ratio_loss_value(x, x, R);
            if (v < best) best = v, argbest = x;
        }
        // Grid minimum sits on the grid point nearest 1/R; the exact minimum is 1 at 1/R.
        CHECK(std::abs(argbest - 1.0 / R) <= 0.005 + 1e-12);
        CHECK(std::abs(ratio_loss_value(1.0 / R, 1.0 / R, R) - 1.0) <= 1e-9);
        CHECK(best >= 1.0 - 1e-9);
    }

    auto G = Tensor::scalar(0.3, true);
    auto l = ratio_loss(0.4, G, 3.0);
    CHECK(l.item() == doctest::Approx(ratio_loss_value(0.4, 0.3, 3.0)).epsilon(1e-14));
    backward(l);
    CHECK(G.grad()[0] == doctest::Approx(1.5 * (2 * 0.4 - 0.6)).epsilon(1e-14));
}
