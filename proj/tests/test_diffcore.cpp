#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dnahnet/checkpoint.hpp"
#include "dnahnet/errors.hpp"
#include "dnahnet/gradcheck.hpp"
#include "dnahnet/ops.hpp"
#include "dnahnet/parameters.hpp"
#include "dnahnet/random.hpp"
#include "doctest.h"

using namespace dnahnet;
using namespace dnahnet::ad;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
    return Tensor::from(std::move(shape), std::move(v), grad);
}

// Random fixed linear functional of t, so every output coordinate gets a
// distinct upstream gradient.
Tensor project(const Tensor& t, std::uint64_t seed) {
    Rng rng(seed);
    return sum(mul(t, rand_tensor(t.shape(), rng, -1.0, 1.0, false)));
}

double check(const std::function<Tensor()>& f, std::vector<Tensor> inputs) {
    return finite_diff_check(f, inputs, {.eps = 1e-5, .coords_per_tensor = 64, .seed = 1}).max_rel_error;
}

}  // namespace

TEST_CASE("op examples") {
    auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    auto p = matmul(m, eye);
    CHECK(std::vector<double>(p.data().begin(), p.data().end()) == std::vector<double>{1, 2, 3, 4});

    auto s = softmax(Tensor::zeros({1, 4}));
    for (double v : s.data()) CHECK(v == 0.25);

    auto c = cosine_rows(Tensor::from({1, 2}, {1, 0}), Tensor::from({1, 2}, {0, 1}));
    CHECK(c.item() == 0.0);

    auto u = Tensor::from({1, 3}, {0.3, -2.0, 5.0});
    CHECK(cosine_rows(u, u).item() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_rows(Tensor::zeros({1, 3}), u).item() == 0.0);
}

TEST_CASE("softmax rows lie on the probability simplex") {
    Rng rng(5);
    auto x = rand_tensor({20, 7}, rng, -30, 30, false);
    auto y = softmax(x);
    for (std::size_t i = 0; i < 20; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 7; ++j) {
            CHECK(y.at(i, j) >= 0.0);
            s += y.at(i, j);
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("every primitive passes the finite-difference check") {
    Rng rng(42);
    constexpr double tol = 1e-6;

    auto a = rand_tensor({4, 3}, rng), b = rand_tensor({3, 5}, rng);
    CHECK(check([&] { return project(matmul(a, b), 1); }, {a, b}) < tol);

    auto x = rand_tensor({4, 3}, rng), y = rand_tensor({4, 3}, rng);
    auto row = rand_tensor({1, 3}, rng), col = rand_tensor({4, 1}, rng), sc = rand_tensor({}, rng);
    CHECK(check([&] { return project(add(x, row), 2); }, {x, row}) < tol);
    CHECK(check([&] { return project(sub(col, y), 3); }, {col, y}) < tol);
    CHECK(check([&] { return project(mul(x, y), 4); }, {x, y}) < tol);
    CHECK(check([&] { return project(mul(sc, x), 5); }, {sc, x}) < tol);
    CHECK(check([&] { return project(affine(x, -2.5, 0.7), 6); }, {x}) < tol);
    CHECK(check([&] { return project(broadcast_to(row, 4, 3), 7); }, {row}) < tol);
    CHECK(check([&] { return project(reshape(x, {3, 4}), 8); }, {x}) < tol);

    auto pos = rand_tensor({3, 4}, rng, 0.2, 3.0);
    CHECK(check([&] { return project(exp(x), 9); }, {x}) < tol);
    CHECK(check([&] { return project(log(pos), 10); }, {pos}) < tol);
    CHECK(check([&] { return project(tanh(x), 11); }, {x}) < tol);
    CHECK(check([&] { return project(sigmoid(x), 12); }, {x}) < tol);
    CHECK(check([&] { return project(silu(x), 13); }, {x}) < tol);
    CHECK(check([&] { return project(softmax(x), 14); }, {x}) < tol);

    auto gain = rand_tensor({3}, rng, 0.5, 1.5), bias = rand_tensor({3}, rng);
    CHECK(check([&] { return project(rms_norm(x, gain), 15); }, {x, gain}) < tol);
    CHECK(check([&] { return project(layer_norm(x, gain, bias), 16); }, {x, gain, bias}) < tol);

    auto decay_full = rand_tensor({4, 3}, rng, 0.1, 0.9), decay_col = rand_tensor({4, 1}, rng, 0.1, 0.9);
    auto decay_row = rand_tensor({1, 3}, rng, 0.1, 0.9);
    CHECK(check([&] { return project(scan(decay_full, x), 17); }, {decay_full, x}) < tol);
    CHECK(check([&] { return project(scan(decay_col, x), 18); }, {decay_col, x}) < tol);
    CHECK(check([&] { return project(scan(decay_row, x), 19); }, {decay_row, x}) < tol);

    auto z = rand_tensor({2, 3}, rng), w = rand_tensor({4, 2}, rng);
    CHECK(check([&] { return project(concat_rows({x, z}), 20); }, {x, z}) < tol);
    CHECK(check([&] { return project(concat_cols({x, w}), 21); }, {x, w}) < tol);
    CHECK(check([&] { return project(slice_rows(x, 1, 3), 22); }, {x}) < tol);
    CHECK(check([&] { return project(slice_cols(x, 1, 3), 23); }, {x}) < tol);
    const std::vector<std::size_t> idx = {3, 0, 0, 2};
    CHECK(check([&] { return project(gather_rows(x, idx), 24); }, {x}) < tol);
    CHECK(check([&] { return project(transpose(x), 25); }, {x}) < tol);
    CHECK(check([&] { return affine(sum(x), 1.7); }, {x}) < tol);
    CHECK(check([&] { return affine(mean(x), 1.7); }, {x}) < tol);
    CHECK(check([&] { return l2_norm(x); }, {x}) < tol);

    auto logits = rand_tensor({5, 4}, rng, -2, 2);
    const std::vector<int> targets = {1, 3, -1, 0, 2};
    CHECK(check([&] { return cross_entropy(logits, targets); }, {logits}) < tol);
    CHECK(check([&] { return project(cosine_rows(x, y), 26); }, {x, y}) < tol);

    auto seqx = rand_tensor({9, 3}, rng), kernel = rand_tensor({4, 3}, rng), kb = rand_tensor({3}, rng);
    CHECK(check([&] { return project(causal_conv1d(seqx, kernel, kb), 27); }, {seqx, kernel, kb}) < tol);

    auto qx = rand_tensor({7, 8}, rng);
    CHECK(check([&] { return project(rotary(qx, 2, 3), 28); }, {qx}) < tol);

    auto q = rand_tensor({7, 8}, rng), k = rand_tensor({7, 8}, rng), v = rand_tensor({7, 8}, rng);
    CHECK(check([&] { return project(causal_attention(q, k, v, 2), 29); }, {q, k, v}) < tol);
}

TEST_CASE("backward on a linear map gives the outer-product gradient") {
    auto W = Tensor::from({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, true);
    auto x = Tensor::from({3, 1}, {1.0, -2.0, 3.0});
    backward(sum(matmul(W, x)));
    // d sum(Wx) / dW[i][j] = x[j]
    const std::vector<double> expect = {1, -2, 3, 1, -2, 3};
    CHECK(std::vector<double>(W.grad().begin(), W.grad().end()) == expect);

    backward(sum(matmul(W, x)));
    for (std::size_t i = 0; i < 6; ++i) CHECK(W.grad()[i] == 2 * expect[i]);

    W.zero_grad();
    for (double g : W.grad()) CHECK(g == 0.0);
}

TEST_CASE("parameters the loss ignores get zero gradient, or GraphError when required") {
    auto used = Tensor::from({2}, {1.0, 2.0}, true);
    auto unused = Tensor::from({2}, {3.0, 4.0}, true);
    unused.zero_grad();
    backward(sum(mul(used, used)));
    for (double g : unused.grad()) CHECK(g == 0.0);

    std::vector<Tensor> required = {unused};
    CHECK_THROWS_AS(backward(sum(used), required), GraphError);
    CHECK_THROWS_AS(backward(used), ShapeError);
}

TEST_CASE("finite-difference oracle on closed forms") {
    Rng rng(9);
    auto w = rand_tensor({6}, rng);
    auto r = finite_diff_check([&] { return sum(mul(w, w)); }, std::span<Tensor>(&w, 1));
    CHECK(r.max_rel_error < 1e-9);
    for (std::size_t i = 0; i < 6; ++i) CHECK(w.grad()[i] == doctest::Approx(2 * w.data()[i]));

    auto c = rand_tensor({3}, rng);
    auto rc = finite_diff_check([&] { return Tensor::scalar(4.0); }, std::span<Tensor>(&c, 1));
    CHECK(rc.max_rel_error == 0.0);
}

TEST_CASE("non-finite results raise NumericsError and shape mismatches ShapeError") {
    CHECK_THROWS_AS(log(Tensor::from({2}, {1.0, 0.0})), NumericsError);
    CHECK_THROWS_AS(exp(Tensor::from({1}, {1e6})), NumericsError);
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
    CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
}

TEST_CASE("no-grad mode records nothing") {
    auto w = Tensor::from({2}, {1.0, 2.0}, true);
    NoGradGuard guard;
    auto y = mul(w, w);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
}

TEST_CASE("f32 mode rounds primitive results to binary32") {
    set_precision(Precision::f32);
    auto y = affine(Tensor::from({1}, {1.0}), 1.0 / 3.0);
    set_precision(Precision::f64);
    CHECK(y.item() == static_cast<double>(static_cast<float>(1.0 / 3.0)));
    CHECK(affine(Tensor::from({1}, {1.0}), 1.0 / 3.0).item() == 1.0 / 3.0);
}

TEST_CASE("parameter names are unique and multipliers positive") {
    ParameterSet ps;
    ps.add("a.w", Tensor::zeros({2}), 2.0);
    CHECK_THROWS(ps.add("a.w", Tensor::zeros({2})));
    CHECK_THROWS(ps.add("b.w", Tensor::zeros({2}), 0.0));
    CHECK(ps.at("a.w").tensor.requires_grad());
    CHECK(ps.scalar_count() == 2);
}

TEST_CASE("checkpoint container round-trips and rejects corruption") {
    std::vector<ArrayEntry> entries = {
        {"stage0.router.wq", DType::f64, {2, 3}, {1.5, -2.25, 3.0, 1e-300, -0.0, 7.0}},
        {"head.bias", DType::f32, {4}, {0.5, 0.25, -1.0, 2.0}},
        {"step", DType::f64, {}, {12.0}},
    };
    std::stringstream ss;
    write_arrays(ss, entries);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 8) == "DNAHNET1");

    std::stringstream in(bytes);
    auto back = read_arrays(in);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].name == entries[i].name);
        CHECK(back[i].dtype == entries[i].dtype);
        CHECK(back[i].shape == entries[i].shape);
        CHECK(back[i].values == entries[i].values);
    }
    std::stringstream again;
    write_arrays(again, back);
    CHECK(again.str() == bytes);

    std::string bad_magic = bytes;
    bad_magic[7] = '2';
    std::stringstream s1(bad_magic);
    CHECK_THROWS_AS(read_arrays(s1), CheckpointError);

    std::stringstream s2(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_arrays(s2), CheckpointError);

    std::stringstream s3(bytes + "x");
    CHECK_THROWS_AS(read_arrays(s3), CheckpointError);
}
