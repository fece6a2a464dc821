#include "doctest.h"
#include "reference.hpp"

#include "jlgcn/graph.hpp"
#include "jlgcn/linalg.hpp"

#include <cmath>

using jlgcn::DenseMatrix;
using jlgcn::LearnedGraph;
using jlgcn::MetricFactor;
using jlgcn::Rng;
namespace graph = jlgcn::graph;
namespace la = jlgcn::linalg;

namespace {

LearnedGraph<double> graph_from(DenseMatrix a) {
    LearnedGraph<double> g;
    g.degree.assign(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (double v : a.row(i)) {
            g.degree[i] += v;
        }
    }
    g.adjacency = std::move(a);
    return g;
}

} // namespace

TEST_CASE("MetricFactor validates its rank") {
    CHECK_THROWS_AS(MetricFactor<double>(DenseMatrix(2, 3)), jlgcn::ConfigError);
    CHECK_THROWS_AS(MetricFactor<double>(DenseMatrix(2, 0)), jlgcn::ConfigError);
    const MetricFactor<double> m(DenseMatrix{{1, 0}, {0, 2}, {1, 1}});
    CHECK(m.feature_dim() == 3);
    CHECK(m.rank() == 2);
    const DenseMatrix metric = m.metric();
    CHECK(la::is_symmetric(metric, 0.0));
    CHECK(metric(2, 2) == 2.0);
}

TEST_CASE("mahalanobis_distances examples") {
    Rng rng(1);
    const DenseMatrix f = ref::random_matrix(7, 4, rng);

    SUBCASE("R = I reduces to the Euclidean distance") {
        const DenseMatrix d = graph::mahalanobis_distances(f, MetricFactor<double>(DenseMatrix::identity(4)));
        const DenseMatrix euclid = ref::mahalanobis(f, DenseMatrix::identity(4));
        CHECK(la::max_abs_diff(d, euclid) < 1e-10);
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK(d(i, i) == 0.0);
        }
        CHECK(la::is_symmetric(d, 0.0));
    }
    SUBCASE("identical rows have zero distance") {
        const DenseMatrix twin{{0.3, -1.0}, {0.3, -1.0}};
        const DenseMatrix d = graph::mahalanobis_distances(twin, MetricFactor<double>(DenseMatrix{{2.0}, {1.0}}));
        CHECK(d(0, 1) == 0.0);
    }
    SUBCASE("rank-one projection drops the second coordinate") {
        const DenseMatrix two{{0, 0}, {3, 7}};
        const DenseMatrix d = graph::mahalanobis_distances(two, MetricFactor<double>(DenseMatrix{{1}, {0}}));
        CHECK(d(0, 1) == doctest::Approx(3.0).epsilon(1e-15));
    }
    SUBCASE("random low-rank factor matches the per-pair formula") {
        const DenseMatrix r = ref::random_matrix(4, 2, rng);
        const DenseMatrix d = graph::mahalanobis_distances(f, MetricFactor<double>(r));
        CHECK(la::max_abs_diff(d, ref::mahalanobis(f, r)) < 1e-12);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(graph::mahalanobis_distances(f, MetricFactor<double>(DenseMatrix::identity(3))),
                        jlgcn::DimensionError);
    }
}

TEST_CASE("kernel_adjacency examples and invariants") {
    const auto g = graph::kernel_adjacency(DenseMatrix{{0, 1}, {1, 0}});
    CHECK(g.adjacency(0, 0) == 1.0);
    CHECK(g.adjacency(0, 1) == doctest::Approx(0.367879441171442).epsilon(1e-14));
    CHECK(g.degree[0] == doctest::Approx(1.0 + std::exp(-1.0)));

    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(rng.below(46));
        const DenseMatrix f = ref::random_matrix(n, 4, rng);
        const DenseMatrix r = ref::random_matrix(4, 3, rng);
        const auto k = graph::kernel_adjacency(graph::mahalanobis_distances(f, MetricFactor<double>(r)));
        CHECK(la::is_symmetric(k.adjacency, 1e-12));
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(k.adjacency(i, i) == 1.0);
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(k.adjacency(i, j) > 0.0);
                CHECK(k.adjacency(i, j) <= 1.0);
            }
        }
        const auto ev = ref::symmetric_eigenvalues(k.laplacian());
        CHECK(ev.front() >= -1e-8);
    }
}

TEST_CASE("glr examples") {
    SUBCASE("constant signal") {
        Rng rng(4);
        const auto g = graph_from(ref::random_graph(5, rng));
        CHECK(graph::glr(g, DenseMatrix(5, 3, 0.7)) == 0.0);
    }
    SUBCASE("two nodes, unit edge, signal (0, 1)") {
        const auto g = graph_from(DenseMatrix{{0, 1}, {1, 0}});
        const DenseMatrix x{{0}, {1}};
        CHECK(graph::glr(g, x) == 1.0);
        // x^T L x with L = [[1, -1], [-1, 1]]
        CHECK(graph::glr_quadratic_form(g, x) == 1.0);
    }
    SUBCASE("linear in the weights") {
        Rng rng(5);
        const DenseMatrix a = ref::random_graph(6, rng);
        const DenseMatrix x = ref::random_matrix(6, 2, rng);
        const double base = graph::glr(graph_from(a), x);
        CHECK(graph::glr(graph_from(la::scale(a, 2.0)), x) == doctest::Approx(2.0 * base).epsilon(1e-14));
    }
}

TEST_CASE("glr equals trace(F^T L F) and the pairwise sum") {
    Rng rng(6);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.below(30));
        const std::size_t k = 1 + static_cast<std::size_t>(rng.below(6));
        const DenseMatrix f = ref::random_matrix(n, k, rng);
        const auto g = graph::kernel_adjacency(
            graph::mahalanobis_distances(f, MetricFactor<double>(ref::random_matrix(k, 1, rng))));
        const double pairs = graph::glr(g, f);
        CHECK(std::abs(pairs - graph::glr_quadratic_form(g, f)) <= 1e-9);
        CHECK(std::abs(pairs - ref::glr_pairs(g.adjacency, f)) <= 1e-9);
    }
}

TEST_CASE("glr on wide sparse signals uses the Gram route consistently") {
    Rng rng(7);
    const std::size_t n = 12;
    DenseMatrix x(n, 200);
    for (auto& v : x.values()) {
        v = rng.uniform() < 0.05 ? rng.uniform() : 0.0;
    }
    const auto g = graph_from(ref::random_graph(n, rng, 0.8));
    CHECK(std::abs(graph::glr(g, x) - ref::glr_pairs(g.adjacency, x)) <= 1e-12);
    const DenseMatrix grad = graph::glr_signal_gradient(g, x);
    DenseMatrix probe = x;
    const DenseMatrix fd = ref::fd_gradient(probe, [&] { return ref::glr_pairs(g.adjacency, probe); });
    CHECK(ref::rel_error(grad, fd) < 1e-7);
}

TEST_CASE("glr decreases when a single distance grows") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 4;
        DenseMatrix d(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                d(i, j) = d(j, i) = rng.uniform(0.0, 2.0);
            }
        }
        const DenseMatrix x = ref::random_matrix(n, 1, rng);
        const double before = graph::glr(graph::kernel_adjacency(d), x);
        DenseMatrix bumped = d;
        const std::size_t i = rng.below(n);
        const std::size_t j = (i + 1 + rng.below(n - 1)) % n;
        bumped(i, j) += 0.25;
        bumped(j, i) += 0.25;
        CHECK(graph::glr(graph::kernel_adjacency(bumped), x) <= before);
    }
}

TEST_CASE("renormalize examples") {
    const DenseMatrix zero(2, 2);
    CHECK(graph::renormalize(zero, graph_from(DenseMatrix::identity(2))) == DenseMatrix::identity(2));
    const DenseMatrix half = graph::renormalize(zero, graph_from(DenseMatrix{{1, 1}, {1, 1}}));
    for (double v : half.values()) {
        CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
    }

    Rng rng(10);
    const DenseMatrix prev = ref::random_graph(8, rng);
    const auto k = graph::kernel_adjacency(
        graph::mahalanobis_distances(ref::random_matrix(8, 3, rng), MetricFactor<double>(DenseMatrix::identity(3))));
    const DenseMatrix out = graph::renormalize(prev, k);
    CHECK(la::max_abs_diff(out, la::transpose(out)) <= 1e-12);
    DenseMatrix s = prev;
    la::accumulate(s, k.adjacency);
    CHECK(la::max_abs_diff(out, ref::sym_normalize(s)) < 1e-14);

    CHECK_THROWS_AS(graph::renormalize(zero, graph_from(DenseMatrix{{1, 0}, {0, 0}})),
                    jlgcn::DegenerateGraphError);
    CHECK_THROWS_AS(graph::renormalize(DenseMatrix(3, 3), graph_from(DenseMatrix::identity(2))),
                    jlgcn::DimensionError);
}

TEST_CASE("backward_through_graph with no signal is zero") {
    Rng rng(12);
    const DenseMatrix f = ref::random_matrix(5, 4, rng);
    const MetricFactor<double> m(ref::random_matrix(4, 2, rng));
    const auto g = graph::backward_through_graph(f, m, ref::random_graph(5, rng), DenseMatrix(5, 5), 0.0);
    CHECK(la::frobenius_norm(g.d_r) == 0.0);
    CHECK(la::frobenius_norm(g.d_features) == 0.0);
    CHECK(la::frobenius_norm(g.d_a_prev) == 0.0);
}

TEST_CASE("backward_through_graph matches finite differences") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.below(5));
        const std::size_t k = 1 + static_cast<std::size_t>(rng.below(5));
        const std::size_t s = 1 + static_cast<std::size_t>(rng.below(std::min<std::size_t>(k, 3)));
        DenseMatrix f = ref::random_matrix(n, k, rng);
        DenseMatrix r = ref::random_matrix(k, s, rng, -0.8, 0.8);
        DenseMatrix prev = trial % 3 == 0 ? DenseMatrix(n, n) : ref::random_graph(n, rng);
        const DenseMatrix up = ref::random_matrix(n, n, rng);
        const double w = trial % 2 == 0 ? 0.3 : 0.0;

        auto objective = [&] {
            const DenseMatrix a = ref::kernel(ref::mahalanobis(f, r));
            DenseMatrix sum = prev;
            for (std::size_t i = 0; i < sum.size(); ++i) {
                sum.values()[i] += a.values()[i];
            }
            return ref::frobenius_dot(up, ref::sym_normalize(sum)) + w * ref::glr_pairs(a, f);
        };
        const auto g = graph::backward_through_graph(f, MetricFactor<double>(r), prev, up, w);
        CHECK(ref::rel_error(g.d_r, ref::fd_gradient(r, objective)) < 1e-5);
        CHECK(ref::rel_error(g.d_features, ref::fd_gradient(f, objective)) < 1e-5);
        CHECK(ref::rel_error(g.d_a_prev, ref::fd_gradient(prev, objective)) < 1e-5);
    }
}

TEST_CASE("backward_through_graph with an external regularizer signal") {
    Rng rng(14);
    DenseMatrix f = ref::random_matrix(5, 4, rng);
    DenseMatrix r = ref::random_matrix(4, 2, rng);
    DenseMatrix x = ref::random_matrix(5, 3, rng);
    const DenseMatrix prev(5, 5);
    const DenseMatrix up = ref::random_matrix(5, 5, rng);
    auto objective = [&] {
        const DenseMatrix a = ref::kernel(ref::mahalanobis(f, r));
        return ref::frobenius_dot(up, ref::sym_normalize(a)) + 0.7 * ref::glr_pairs(a, x);
    };
    const auto g = graph::backward_through_graph(f, MetricFactor<double>(r), prev, up, 0.7, &x);
    CHECK(ref::rel_error(g.d_r, ref::fd_gradient(r, objective)) < 1e-5);
    CHECK(ref::rel_error(g.d_features, ref::fd_gradient(f, objective)) < 1e-5);
    CHECK(ref::rel_error(g.d_signal, ref::fd_gradient(x, objective)) < 1e-5);
}
