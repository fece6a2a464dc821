#include "doctest.h"
#include "reference.hpp"

#include "jlgcn/linalg.hpp"
#include "jlgcn/loss.hpp"
#include "jlgcn/model.hpp"

#include <algorithm>
#include <numeric>
#include <string>

using jlgcn::DenseMatrix;
using jlgcn::GraphClassifierNet;
using jlgcn::GraphNetConfig;
using jlgcn::LayerMode;
using jlgcn::NodeClassifierNet;
using jlgcn::NodeNetConfig;
using jlgcn::Rng;
namespace la = jlgcn::linalg;

namespace {

NodeNetConfig node_config(LayerMode mode, std::vector<std::size_t> widths, std::size_t rank) {
    NodeNetConfig c;
    c.widths = std::move(widths);
    c.layer.mode = mode;
    c.layer.rank = rank;
    c.layer.r_std = 0.7;
    c.dropout = 0.0;
    return c;
}

GraphNetConfig graph_config(std::size_t classes) {
    GraphNetConfig c;
    c.in_dim = 3;
    c.widths = {4, 5};
    c.head = {6};
    c.classes = classes;
    c.layer.rank = 2;
    c.layer.r_std = 0.8;
    c.head_dropout = 0.0;
    return c;
}

std::vector<DenseMatrix> random_batch(Rng& rng, std::initializer_list<std::size_t> sizes) {
    std::vector<DenseMatrix> batch;
    for (std::size_t n : sizes) {
        batch.push_back(ref::random_matrix(n, 3, rng));
    }
    return batch;
}

} // namespace

TEST_CASE("node network with zero weights gives zero logits") {
    Rng rng(1);
    NodeClassifierNet<double> net(node_config(LayerMode::jlgcn, {4, 3, 5}, 2), rng);
    for (auto& p : net.parameters()) {
        if (p.name.ends_with(".w")) {
            p.value->fill(0.0);
        }
    }
    const auto out = net.forward(ref::random_matrix(6, 4, rng), DenseMatrix(6, 6), false);
    CHECK(out.logits.rows() == 6);
    CHECK(out.logits.cols() == 5);
    CHECK(la::frobenius_norm(out.logits) == 0.0);
    const DenseMatrix p = la::row_softmax(out.logits);
    CHECK(p(3, 2) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("node network glr_total is the sum of the per-layer terms") {
    Rng rng(2);
    NodeClassifierNet<double> net(node_config(LayerMode::jlgcn, {4, 3, 2}, 2), rng);
    const DenseMatrix f = ref::random_matrix(6, 4, rng);
    const DenseMatrix a = ref::random_graph(6, rng);
    const auto out = net.forward(f, a, false);

    auto& layers = net.layers();
    const auto l1 = ref::layer(f, f, a, ref::Mode::jlgcn, layers[0].params.w,
                               &layers[0].params.metric->factor());
    DenseMatrix h = l1.out;
    for (auto& v : h.values()) {
        v = ref::leaky(v, 0.2);
    }
    const auto l2 = ref::layer(h, h, l1.graph_out, ref::Mode::jlgcn, layers[1].params.w,
                               &layers[1].params.metric->factor());
    CHECK(std::abs(out.glr_total - (l1.glr + l2.glr)) <= 1e-10);
    CHECK(la::max_abs_diff(out.logits, l2.out) <= 1e-12);
}

TEST_CASE("plain two-layer network with lambda = 0 has the closed-form GCN gradient") {
    Rng rng(3);
    NodeClassifierNet<double> net(node_config(LayerMode::plain_gcn, {4, 3, 2}, 1), rng);
    const DenseMatrix f = ref::random_matrix(6, 4, rng);
    const DenseMatrix a = ref::random_graph(6, rng);
    net.forward(f, a, true);
    const DenseMatrix u = ref::random_matrix(6, 2, rng);
    const auto grads = net.backward(u, 0.0);
    REQUIRE(grads.size() == 2);

    DenseMatrix s = a;
    for (std::size_t i = 0; i < 6; ++i) {
        s(i, i) += 1.0;
    }
    const DenseMatrix a_hat = ref::sym_normalize(s);
    const DenseMatrix& w1 = net.layers()[0].params.w;
    const DenseMatrix& w2 = net.layers()[1].params.w;
    const DenseMatrix z1 = ref::matmul(ref::matmul(a_hat, f), w1);
    DenseMatrix h = z1;
    for (auto& v : h.values()) {
        v = ref::leaky(v, 0.2);
    }
    const DenseMatrix d_w2 = ref::matmul(la::transpose(ref::matmul(a_hat, h)), u);
    DenseMatrix d_z1 = ref::matmul(ref::matmul(la::transpose(a_hat), u), la::transpose(w2));
    for (std::size_t i = 0; i < d_z1.size(); ++i) {
        d_z1.values()[i] *= z1.values()[i] > 0 ? 1.0 : 0.2;
    }
    const DenseMatrix d_w1 = ref::matmul(la::transpose(ref::matmul(a_hat, f)), d_z1);
    CHECK(la::max_abs_diff(grads[0], d_w1) <= 1e-12);
    CHECK(la::max_abs_diff(grads[1], d_w2) <= 1e-12);
}

TEST_CASE("node network gradients match whole-network finite differences") {
    Rng rng(4);
    for (LayerMode mode : {LayerMode::plain_gcn, LayerMode::jlgcn, LayerMode::jlgcn_concat}) {
        for (int variant = 0; variant < 4; ++variant) {
            CAPTURE(std::string(jlgcn::to_string(mode)));
            CAPTURE(variant);
            NodeNetConfig cfg = node_config(mode, {4, 3, 2}, 2);
            cfg.dropout = variant >= 2 ? 0.4 : 0.0;
            cfg.dropout_all_layers = variant == 3;
            cfg.layer.accumulation = variant == 1 ? jlgcn::GraphAccumulation::normalized
                                                  : jlgcn::GraphAccumulation::raw;
            cfg.layer.glr_signal = variant == 2 ? jlgcn::GlrSignal::output
                                                : jlgcn::GlrSignal::input;
            cfg.layer.bias = variant == 1;
            NodeClassifierNet<double> net(cfg, rng);
            const DenseMatrix f = ref::random_matrix(6, 4, rng);
            const DenseMatrix a = variant == 0 ? DenseMatrix(6, 6) : ref::random_graph(6, rng);
            const std::vector<int> labels{0, 1, 1, 0, 1, 0};
            const jlgcn::Mask mask{true, true, false, true, false, true};
            const double lambda = 0.05;

            auto objective = [&] {
                Rng drop(99);
                const auto out = net.forward(f, a, true, &drop);
                return jlgcn::joint_loss(out.logits, std::span<const int>(labels), mask,
                                         out.glr_total, lambda);
            };
            Rng drop(99);
            const auto out = net.forward(f, a, true, &drop);
            const auto ce = jlgcn::cross_entropy(out.logits, std::span<const int>(labels), mask);
            const auto grads = net.backward(ce.d_logits, lambda);
            auto params = net.parameters();
            REQUIRE(grads.size() == params.size());
            for (std::size_t k = 0; k < params.size(); ++k) {
                CAPTURE(params[k].name);
                const DenseMatrix fd = ref::fd_gradient(*params[k].value, objective);
                CHECK(ref::rel_error(grads[k], fd) < 1e-5);
            }
        }
    }
}

TEST_CASE("node network zero upstream and lambda = 0 give zero gradients") {
    Rng rng(5);
    NodeClassifierNet<double> net(node_config(LayerMode::jlgcn, {4, 3, 2}, 2), rng);
    net.forward(ref::random_matrix(5, 4, rng), DenseMatrix(5, 5), true);
    for (const auto& g : net.backward(DenseMatrix(5, 2), 0.0)) {
        CHECK(la::frobenius_norm(g) == 0.0);
    }
}

TEST_CASE("node network backward needs a training forward") {
    Rng rng(6);
    NodeClassifierNet<double> net(node_config(LayerMode::jlgcn, {4, 3, 2}, 2), rng);
    CHECK_THROWS_AS(net.backward(DenseMatrix(5, 2), 0.0), jlgcn::MissingCacheError);
    net.forward(ref::random_matrix(5, 4, rng), DenseMatrix(5, 5), false);
    CHECK_THROWS_AS(net.backward(DenseMatrix(5, 2), 0.0), jlgcn::MissingCacheError);
}

TEST_CASE("node network eval forward is deterministic and dropout-free") {
    Rng rng(7);
    NodeNetConfig cfg = node_config(LayerMode::jlgcn, {4, 3, 2}, 2);
    cfg.dropout = 0.5;
    cfg.dropout_all_layers = true;
    NodeClassifierNet<double> net(cfg, rng);
    const DenseMatrix f = ref::random_matrix(5, 4, rng);
    Rng r(1);
    const auto a = net.forward(f, DenseMatrix(5, 5), false, &r);
    const auto b = net.forward(f, DenseMatrix(5, 5), false, &r);
    CHECK(a.logits == b.logits);
    CHECK(r.position() == 0);
}

TEST_CASE("node network learned adjacencies") {
    Rng rng(8);
    NodeClassifierNet<double> net(node_config(LayerMode::jlgcn, {4, 3, 2}, 2), rng);
    const DenseMatrix f = ref::random_matrix(5, 4, rng);
    const auto graphs = net.learned_adjacencies(f, DenseMatrix(5, 5));
    REQUIRE(graphs.size() == 2);
    const DenseMatrix expected =
        ref::kernel(ref::mahalanobis(f, net.layers()[0].params.metric->factor()));
    CHECK(la::max_abs_diff(graphs[0], expected) <= 1e-12);
    CHECK(graphs[1].rows() == 5);
}

TEST_CASE("graph network pooling of a single node is the identity") {
    Rng rng(9);
    GraphNetConfig cfg = graph_config(2);
    cfg.head = {};
    GraphClassifierNet<double> net(cfg, rng);
    const std::vector<DenseMatrix> batch{DenseMatrix{{0.1, -0.2, 0.3}}};
    const auto out = net.forward(batch, false);
    CHECK(out.logits.rows() == 1);
    CHECK(out.logits.cols() == 2);
}

TEST_CASE("graph network logits are invariant to point permutations") {
    Rng rng(10);
    GraphClassifierNet<double> net(graph_config(3), rng);
    auto batch = random_batch(rng, {7, 5});
    // a few training steps of statistics so eval uses non-trivial running values
    net.forward(batch, true);
    const auto base = net.forward(batch, false);

    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    DenseMatrix permuted(7, 3);
    for (std::size_t i = 0; i < 7; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            permuted(i, c) = batch[0](perm[i], c);
        }
    }
    batch[0] = permuted;
    const auto moved = net.forward(batch, false);
    CHECK(la::max_abs_diff(base.logits, moved.logits) <= 1e-12);
}

TEST_CASE("graph network duplicated instances give identical logits") {
    Rng rng(11);
    GraphClassifierNet<double> net(graph_config(3), rng);
    auto batch = random_batch(rng, {6});
    batch.push_back(batch[0]);
    const auto out = net.forward(batch, false);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(out.logits(0, c) == out.logits(1, c));
    }
}

TEST_CASE("graph network gradients match whole-network finite differences") {
    Rng rng(12);
    for (int variant = 0; variant < 3; ++variant) {
        CAPTURE(variant);
        GraphNetConfig cfg = graph_config(3);
        cfg.head_dropout = variant == 1 ? 0.3 : 0.0;
        cfg.layer.mode = variant == 2 ? LayerMode::jlgcn : LayerMode::jlgcn_concat;
        cfg.layer.glr_signal = variant == 2 ? jlgcn::GlrSignal::output : jlgcn::GlrSignal::input;
        GraphClassifierNet<double> net(cfg, rng);
        const auto batch = random_batch(rng, {5, 4, 6});
        const std::vector<int> labels{0, 2, 1};
        const jlgcn::Mask mask(3, true);
        const double lambda = 0.1;
        auto objective = [&] {
            Rng drop(5);
            const auto out = net.forward(batch, true, &drop);
            return jlgcn::joint_loss(out.logits, std::span<const int>(labels), mask,
                                     out.glr_total, lambda);
        };
        Rng drop(5);
        const auto out = net.forward(batch, true, &drop);
        const auto ce = jlgcn::cross_entropy(out.logits, std::span<const int>(labels), mask);
        const auto grads = net.backward(ce.d_logits, lambda);
        auto params = net.parameters();
        REQUIRE(grads.size() == params.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
            CAPTURE(params[k].name);
            const DenseMatrix fd = ref::fd_gradient(*params[k].value, objective);
            CHECK(ref::rel_error(grads[k], fd) < 1e-5);
        }
    }
}

TEST_CASE("graph network running statistics move only in training") {
    Rng rng(13);
    GraphClassifierNet<double> net(graph_config(2), rng);
    const auto batch = random_batch(rng, {5, 5});
    const DenseMatrix before = *net.buffers()[0].value;
    net.forward(batch, false);
    CHECK(*net.buffers()[0].value == before);
    net.forward(batch, true);
    CHECK_FALSE(*net.buffers()[0].value == before);
}

TEST_CASE("graph network input errors") {
    Rng rng(14);
    GraphClassifierNet<double> net(graph_config(2), rng);
    std::vector<DenseMatrix> batch{DenseMatrix(0, 3)};
    CHECK_THROWS_AS(net.forward(batch, false), jlgcn::EmptyInputError);
    batch = {DenseMatrix(4, 2)};
    CHECK_THROWS_AS(net.forward(batch, false), jlgcn::DimensionError);
    CHECK_THROWS_AS(net.forward(std::span<const DenseMatrix>{}, false), jlgcn::EmptyInputError);
    CHECK_THROWS_AS(net.backward(DenseMatrix(1, 2), 0.0), jlgcn::MissingCacheError);
}
