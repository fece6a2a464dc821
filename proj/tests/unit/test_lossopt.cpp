#include "doctest.h"
#include "reference.hpp"

#include "jlgcn/linalg.hpp"
#include "jlgcn/loss.hpp"
#include "jlgcn/optim.hpp"

#include <cmath>

using jlgcn::Adam;
using jlgcn::AdamConfig;
using jlgcn::DenseMatrix;
using jlgcn::Mask;
using jlgcn::ParamRef;
using jlgcn::Rng;

TEST_CASE("cross_entropy examples") {
    SUBCASE("confident correct prediction") {
        const DenseMatrix logits{{60.0, 0.0, 0.0}};
        const std::vector<int> y{0};
        CHECK(jlgcn::cross_entropy(logits, std::span<const int>(y), Mask{true}).loss < 1e-20);
    }
    SUBCASE("uniform logits over 7 classes") {
        const DenseMatrix logits(4, 7, 0.3);
        const std::vector<int> y{0, 3, 6, 2};
        const auto ce = jlgcn::cross_entropy(logits, std::span<const int>(y), Mask(4, true));
        CHECK(ce.loss == doctest::Approx(std::log(7.0)).epsilon(1e-14));
        CHECK(ce.loss == doctest::Approx(1.9459).epsilon(1e-4));
    }
    SUBCASE("huge logits stay finite") {
        const DenseMatrix logits{{1000.0, -1000.0}};
        const std::vector<int> y{1};
        CHECK(jlgcn::cross_entropy(logits, std::span<const int>(y), Mask{true}).loss ==
              doctest::Approx(2000.0));
    }
}

TEST_CASE("cross_entropy matches the explicit formula and finite differences") {
    Rng rng(1);
    DenseMatrix logits = ref::random_matrix(3, 4, rng, -2.0, 2.0);
    const std::vector<int> y{2, 0, 3};
    const Mask mask{true, false, true};
    const auto ce = jlgcn::cross_entropy(logits, std::span<const int>(y), mask);
    CHECK(std::abs(ce.loss - ref::cross_entropy(logits, y, mask)) < 1e-14);
    const DenseMatrix fd =
        ref::fd_gradient(logits, [&] { return ref::cross_entropy(logits, y, mask); });
    CHECK(jlgcn::linalg::max_abs_diff(ce.d_logits, fd) < 1e-7);
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(ce.d_logits(1, c) == 0.0);
    }

    const auto summed =
        jlgcn::cross_entropy(logits, std::span<const int>(y), mask, jlgcn::Reduction::sum);
    CHECK(summed.loss == doctest::Approx(2.0 * ce.loss).epsilon(1e-14));
}

TEST_CASE("cross_entropy errors") {
    const DenseMatrix logits(2, 3);
    const std::vector<int> y{0, 5};
    CHECK_THROWS_AS(jlgcn::cross_entropy(logits, std::span<const int>(y), Mask{false, false}),
                    jlgcn::EmptyMaskError);
    CHECK_THROWS_AS(jlgcn::cross_entropy(logits, std::span<const int>(y), Mask{true, true}),
                    jlgcn::IndexError);
    // an out-of-range label on an unmasked row is ignored
    CHECK_NOTHROW(jlgcn::cross_entropy(logits, std::span<const int>(y), Mask{true, false}));
    CHECK_THROWS_AS(jlgcn::cross_entropy(logits, std::span<const int>(y), Mask{true}),
                    jlgcn::DimensionError);
}

TEST_CASE("joint_loss") {
    Rng rng(2);
    const DenseMatrix logits = ref::random_matrix(5, 3, rng);
    const std::vector<int> y{0, 1, 2, 0, 1};
    const Mask mask(5, true);
    const std::span<const int> labels(y);
    const double ce = jlgcn::cross_entropy(logits, labels, mask).loss;
    CHECK(jlgcn::joint_loss(logits, labels, mask, 123.0, 0.0) == ce);
    CHECK(jlgcn::joint_loss(logits, labels, mask, 100.0, 1e-4) ==
          doctest::Approx(ce + 0.01).epsilon(1e-14));
    double prev = jlgcn::joint_loss(logits, labels, mask, 0.0, 1e-3);
    for (double g : {1.0, 2.0, 10.0, 1000.0}) {
        const double now = jlgcn::joint_loss(logits, labels, mask, g, 1e-3);
        CHECK(now > prev);
        prev = now;
    }
    CHECK_THROWS_AS(jlgcn::joint_loss(logits, labels, mask, 1.0, -1.0), jlgcn::ConfigError);
}

TEST_CASE("accuracy") {
    const DenseMatrix logits{{1, 0}, {0, 1}, {1, 0}, {0, 1}};
    const std::vector<int> y{0, 0, 0, 1};
    CHECK(jlgcn::accuracy(logits, std::span<const int>(y), Mask(4, true)) == 0.75);
    CHECK(jlgcn::accuracy(logits, std::span<const int>(y), Mask{false, true, false, false}) == 0.0);
}

TEST_CASE("adam with zero gradient and no decay leaves parameters unchanged") {
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Adam<double> opt(cfg);
    DenseMatrix w{{1.0, -2.0}};
    const DenseMatrix before = w;
    const std::vector<ParamRef<double>> params{{"w", &w, true}};
    const std::vector<DenseMatrix> grads{DenseMatrix(1, 2)};
    for (int i = 0; i < 5; ++i) {
        opt.step(params, grads, 0.1);
    }
    CHECK(w == before);
    CHECK(opt.steps() == 5);
}

TEST_CASE("adam first step is close to -lr * sign(g)") {
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Adam<double> opt(cfg);
    DenseMatrix w{{0.0, 0.0, 0.0}};
    const std::vector<ParamRef<double>> params{{"w", &w, true}};
    const std::vector<DenseMatrix> grads{DenseMatrix{{3.0, -0.5, 1e-3}}};
    opt.step(params, grads, 0.1);
    CHECK(w(0, 0) == doctest::Approx(-0.1).epsilon(1e-7));
    CHECK(w(0, 1) == doctest::Approx(0.1).epsilon(1e-7));
    CHECK(w(0, 2) == doctest::Approx(-0.1 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam step is scale invariant for large gradients") {
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Rng rng(3);
    const DenseMatrix g = ref::random_matrix(3, 3, rng);
    DenseMatrix w1(3, 3);
    DenseMatrix w2(3, 3);
    Adam<double> a(cfg);
    Adam<double> b(cfg);
    a.step(std::vector<ParamRef<double>>{{"w", &w1, true}}, std::vector<DenseMatrix>{g}, 0.01);
    b.step(std::vector<ParamRef<double>>{{"w", &w2, true}},
           std::vector<DenseMatrix>{jlgcn::linalg::scale(g, 1000.0)}, 0.01);
    CHECK(ref::rel_error(w1, w2) < 1e-3);
}

TEST_CASE("adam applies weight decay only where requested") {
    AdamConfig cfg;
    cfg.weight_decay = 0.5;
    Adam<double> opt(cfg);
    DenseMatrix w{{2.0}};
    DenseMatrix b{{2.0}};
    const std::vector<ParamRef<double>> params{{"w", &w, true}, {"b", &b, false}};
    const std::vector<DenseMatrix> grads{DenseMatrix(1, 1), DenseMatrix(1, 1)};
    opt.step(params, grads, 0.1);
    CHECK(w(0, 0) == doctest::Approx(1.9));
    CHECK(b(0, 0) == 2.0);

    const std::vector<DenseMatrix> wrong{DenseMatrix(1, 2), DenseMatrix(1, 1)};
    CHECK_THROWS_AS(opt.step(params, wrong, 0.1), jlgcn::DimensionError);
    CHECK_THROWS_AS(opt.step(params, std::vector<DenseMatrix>{}, 0.1), jlgcn::DimensionError);
}

TEST_CASE("adam minimizes a quadratic") {
    AdamConfig cfg;
    cfg.weight_decay = 0.0;
    Adam<double> opt(cfg);
    DenseMatrix w{{5.0, -3.0}};
    const std::vector<ParamRef<double>> params{{"w", &w, true}};
    for (int i = 0; i < 2000; ++i) {
        const std::vector<DenseMatrix> g{jlgcn::linalg::scale(w, 2.0)};
        opt.step(params, g, 0.05);
    }
    CHECK(std::abs(w(0, 0)) < 1e-2);
    CHECK(std::abs(w(0, 1)) < 1e-2);
}

TEST_CASE("step learning-rate schedule") {
    AdamConfig cfg;
    CHECK(jlgcn::scheduled_lr(cfg, 0) == 0.1);
    CHECK(jlgcn::scheduled_lr(cfg, 99) == 0.1);
    CHECK(jlgcn::scheduled_lr(cfg, 100) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(jlgcn::scheduled_lr(cfg, 250) == doctest::Approx(0.025).epsilon(1e-15));
    cfg.decay_period = 0;
    CHECK(jlgcn::scheduled_lr(cfg, 1000) == 0.1);
    cfg.beta1 = 1.0;
    CHECK_THROWS_AS(Adam<double>{cfg}, jlgcn::ConfigError);
}
