#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "dnahnet/errors.hpp"
#include "dnahnet/ops.hpp"
#include "dnahnet/train.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace dnahnet;
using namespace dnahnet::ad;
using namespace dnahnet::train;
using dnahnet::testing::random_codes;
using dnahnet::testing::tiny_config;

namespace {

Corpus small_corpus(std::size_t n, std::size_t len, std::uint64_t seed) {
    Corpus c;
    for (auto& s : seq::synth_codon_corpus(n, len, seed)) c.push_back(s.codes);
    return c;
}

TrainConfig quick_train() {
    TrainConfig t;
    t.base_lr = 3e-3;
    t.warmup_steps = 5;
    t.max_steps = 40;
    t.batch_size = 2;
    t.log_every = 5;
    t.seed = 9;
    return t;
}

std::vector<double> flat_params(HNetModel& m) {
    std::vector<double> out;
    for (const auto& p : m.parameters().items()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
    TrainConfig c;
    c.base_lr = 1e-3;
    c.warmup_steps = 100;
    c.max_steps = 1000;
    CHECK(lr_at(0, c) == 0.0);
    CHECK(lr_at(50, c) == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(lr_at(100, c) == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(lr_at(550, c) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(lr_at(1000, c) == 0.0);
    for (std::size_t s = 101; s < 1000; ++s) CHECK(lr_at(s, c) <= lr_at(s - 1, c));
}

TEST_CASE("gradient clipping rescales to the maximum norm") {
    ParameterSet ps;
    auto a = ps.add("a", Tensor::from({1, 2}, {0, 0}, true));
    auto b = ps.add("b", Tensor::from({1, 1}, {0}, true));
    backward(sum(mul(Tensor::from({1, 2}, {6, 0}), a)));
    backward(sum(mul(Tensor::from({1, 1}, {8}), b)));
    CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(a.grad()[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(b.grad()[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(clip_grad_norm(ps, 5.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a.grad()[0] == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("AdamW matches a hand-computed two-step trajectory") {
    TrainConfig c;
    c.weight_decay = 0.1;
    ParameterSet ps;
    auto x = ps.add("x", Tensor::from({1, 1}, {2.0}, true), 2.0, true);
    auto y = ps.add("y", Tensor::from({1, 1}, {-1.0}, true), 1.0, false);
    AdamW opt(ps, c);

    // Hand oracle: decay, then bias-corrected Adam, for f = x^2 + 3y.
    double hx = 2.0, hy = -1.0, mx = 0, vx = 0, my = 0, vy = 0;
    const double lrs[2] = {0.01, 0.005};
    for (int t = 1; t <= 2; ++t) {
        ps.zero_grads();
        backward(add(sum(mul(x, x)), sum(mul(Tensor::from({1, 1}, {3.0}), y))));
        opt.step(lrs[t - 1]);

        const double gx = 2 * hx, gy = 3.0;
        const double c1 = 1 - std::pow(0.9, t), c2 = 1 - std::pow(0.95, t);
        mx = 0.9 * mx + 0.1 * gx;
        vx = 0.95 * vx + 0.05 * gx * gx;
        my = 0.9 * my + 0.1 * gy;
        vy = 0.95 * vy + 0.05 * gy * gy;
        const double rx = lrs[t - 1] * 2.0, ry = lrs[t - 1];
        hx -= rx * 0.1 * hx;
        hx -= rx * (mx / c1) / (std::sqrt(vx / c2) + 1e-8);
        hy -= ry * (my / c1) / (std::sqrt(vy / c2) + 1e-8);
        CHECK(std::abs(x.data()[0] - hx) <= 1e-12);
        CHECK(std::abs(y.data()[0] - hy) <= 1e-12);
    }
    CHECK(opt.steps() == 2);
}

TEST_CASE("data order is a per-epoch permutation fixed by the seed") {
    HNetModel model(tiny_config());
    auto cfg = quick_train();
    Trainer t(model, cfg, small_corpus(7, 30, 1));
    for (std::size_t epoch = 0; epoch < 3; ++epoch) {
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < 7; ++i) seen.insert(t.sample_index(epoch * 7 + i));
        CHECK(seen.size() == 7);
    }
    Trainer u(model, cfg, small_corpus(7, 30, 1));
    for (std::size_t k = 0; k < 30; ++k) CHECK(t.sample_index(k) == u.sample_index(k));
}

TEST_CASE("training is deterministic and resume continues bit for bit") {
    const auto corpus = small_corpus(6, 48, 2);
    auto cfg = quick_train();
    cfg.max_steps = 10;

    HNetModel a(tiny_config(Confidence::ste, 4));
    Trainer ta(a, cfg, corpus);
    std::vector<double> nll_a;
    for (int i = 0; i < 10; ++i) nll_a.push_back(ta.train_step().nll);

    HNetModel b(tiny_config(Confidence::ste, 4));
    Trainer tb(b, cfg, corpus);
    for (int i = 0; i < 4; ++i) CHECK(tb.train_step().nll == nll_a[i]);
    const auto path = std::filesystem::temp_directory_path() / "dnahnet_test_train.ckpt";
    RunConfig run;
    tb.save(path, run);

    HNetModel c(tiny_config(Confidence::ste, 99));
    Trainer tc(c, cfg, corpus);
    tc.resume(path);
    CHECK(tc.step() == 4);
    for (int i = 4; i < 10; ++i) CHECK(tc.train_step().nll == nll_a[i]);
    CHECK(flat_params(a) == flat_params(c));

    const auto saved = read_config(config_path_for(path));
    CHECK(saved.model == tiny_config(Confidence::ste, 4));
    CHECK(saved.train == cfg);
    std::filesystem::remove(path);
    std::filesystem::remove(config_path_for(path));
}

TEST_CASE("gradient accumulation equals the larger batch") {
    const auto corpus = small_corpus(8, 42, 3);
    auto big = quick_train();
    big.batch_size = 4;
    auto acc = big;
    acc.batch_size = 2;
    acc.grad_accum = 2;
    HNetModel a(tiny_config(Confidence::ste, 6)), b(tiny_config(Confidence::ste, 6));
    Trainer ta(a, big, corpus), tb(b, acc, corpus);
    for (int i = 0; i < 3; ++i) {
        const auto ma = ta.train_step(), mb = tb.train_step();
        CHECK(ma.nll == doctest::Approx(mb.nll).epsilon(1e-12));
    }
    const auto pa = flat_params(a), pb = flat_params(b);
    double worst = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) worst = std::max(worst, std::abs(pa[i] - pb[i]));
    CHECK(worst < 1e-10);
}

TEST_CASE("loss decreases on the codon corpus, with and without the rate term") {
    for (double alpha : {0.01, 0.0}) {
        auto mc = tiny_config(Confidence::ste, 5);
        mc.alpha = alpha;
        HNetModel model(mc);
        auto cfg = quick_train();
        cfg.max_steps = 120;
        cfg.base_lr = 5e-3;
        Trainer t(model, cfg, small_corpus(24, 60, 4));
        double first = 0, last = 0;
        for (std::size_t s = 1; s <= cfg.max_steps; ++s) {
            const auto m = t.train_step();
            CHECK(std::isfinite(m.nll));
            if (s <= 10) first += m.nll / 10;
            if (s > cfg.max_steps - 10) last += m.nll / 10;
        }
        INFO("alpha " << alpha << " first " << first << " last " << last);
        CHECK(last < first - 0.05);
    }
}

TEST_CASE("metrics rows and routing warnings") {
    StepMetrics m;
    m.step = 3;
    m.lr = 0.5;
    m.nll = 1.0;
    m.ppl = std::exp(1.0);
    m.rate_loss = {1.25};
    m.F = {0.01};
    m.G = {0.25};
    m.warnings = routing_warnings(m.F);
    REQUIRE(m.warnings.size() == 1);
    const auto row = format_metrics_row(m);
    CHECK(row.rfind("3,0.5,1,", 0) == 0);
    // 11 columns, the missing second stage left empty.
    CHECK(std::count(row.begin(), row.end(), ',') == 10);
    CHECK(row.find(",,,") != std::string::npos);
    CHECK(routing_warnings({0.5, 0.99}).size() == 1);
    CHECK(routing_warnings({0.02, 0.98}).empty());
}

TEST_CASE("fit writes metrics and a checkpoint") {
    const auto dir = std::filesystem::temp_directory_path() / "dnahnet_test_fit";
    std::filesystem::create_directories(dir);
    HNetModel model(tiny_config());
    auto cfg = quick_train();
    cfg.max_steps = 12;
    cfg.log_every = 4;
    Trainer t(model, cfg, small_corpus(4, 30, 5));
    std::size_t calls = 0;
    auto r = fit(t, {dir / "m.ckpt", dir / "metrics.csv", RunConfig{}, ad::DType::f64, [&](const StepMetrics&) { ++calls; }});
    CHECK(calls == r.history.size());
    CHECK(r.history.back().step == 12);
    CHECK(std::filesystem::exists(dir / "m.ckpt"));
    CHECK(std::filesystem::exists(dir / "m.ckpt.cfg"));
    std::ifstream in(dir / "metrics.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == kMetricsHeader);
    auto loaded = load_model(dir / "m.ckpt");
    CHECK(flat_params(*loaded) == flat_params(model));
    std::filesystem::remove_all(dir);
}

TEST_CASE("training rejects unusable corpora") {
    HNetModel model(tiny_config());
    CHECK_THROWS_AS(Trainer(model, quick_train(), Corpus{}), Error);
    CHECK_THROWS_AS(Trainer(model, quick_train(), Corpus{{0}}), Error);
}
