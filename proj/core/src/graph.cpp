#include "jlgcn/graph.hpp"

#include "jlgcn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace jlgcn {

template <std::floating_point T>
MetricFactor<T>::MetricFactor(Matrix<T> r) : r_(std::move(r)) {
    if (r_.cols() < 1 || r_.cols() > r_.rows()) {
        throw ConfigError("MetricFactor: rank S=" + std::to_string(r_.cols()) +
                          " must satisfy 1 <= S <= K=" + std::to_string(r_.rows()));
    }
}

template <std::floating_point T>
Matrix<T> MetricFactor<T>::metric() const {
    return linalg::matmul_nt(r_, r_);
}

template <std::floating_point T>
Matrix<T> LearnedGraph<T>::laplacian() const {
    Matrix<T> lap = linalg::scale(adjacency, T(-1));
    for (std::size_t i = 0; i < nodes(); ++i) {
        lap(i, i) += degree[i];
    }
    return lap;
}

namespace graph {

namespace {

// Above this width, pairwise squared distances of a signal come from the
// Gram matrix built over a per-column index of the nonzero entries, so
// sparse bag-of-words features cost sum_k df_k^2 instead of N^2 K.
constexpr std::size_t kGramWidth = 64;

template <std::floating_point T>
Matrix<T> squared_distances_any_width(const Matrix<T>& x) {
    if (x.cols() <= kGramWidth) {
        return pairwise_squared_distances(x);
    }
    const std::size_t n = x.rows();
    const std::size_t k = x.cols();
    std::vector<std::size_t> start(k + 1, 0);
    std::vector<T> norm(n, T(0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            const T v = x(i, c);
            if (v != T(0)) {
                ++start[c + 1];
                norm[i] += v * v;
            }
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        start[c + 1] += start[c];
    }
    // column c holds its nonzero rows in ascending order
    std::vector<std::size_t> row_of(start[k]);
    std::vector<T> value_of(start[k]);
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            const T v = x(i, c);
            if (v != T(0)) {
                row_of[fill[c]] = i;
                value_of[fill[c]] = v;
                ++fill[c];
            }
        }
    }

    Matrix<T> out(n, n);
    const auto rows = static_cast<std::int64_t>(n);
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic, 16)
#endif
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        T* gram = out.data() + i * n;  // upper part of row i, overwritten below
        for (std::size_t c = 0; c < k; ++c) {
            const T v = x(i, c);
            if (v == T(0)) {
                continue;
            }
            const auto first = std::upper_bound(row_of.begin() + static_cast<std::ptrdiff_t>(start[c]),
                                                row_of.begin() + static_cast<std::ptrdiff_t>(start[c + 1]), i);
            for (auto it = first; it != row_of.begin() + static_cast<std::ptrdiff_t>(start[c + 1]); ++it) {
                gram[*it] += v * value_of[static_cast<std::size_t>(it - row_of.begin())];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            gram[j] = std::max(T(0), norm[i] + norm[j] - T(2) * gram[j]);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            out(j, i) = out(i, j);
        }
    }
    linalg::ensure_finite(out, "signal_squared_distances");
    return out;
}

// A X for symmetric A.
template <std::floating_point T>
Matrix<T> symmetric_times(const Matrix<T>& a, const Matrix<T>& x) {
    if (x.cols() <= kGramWidth) {
        return linalg::matmul(a, x);
    }
    return linalg::transpose(linalg::matmul_tn(x, a));
}

template <std::floating_point T>
std::vector<T> row_sums(const Matrix<T>& a) {
    std::vector<T> out(a.rows(), T(0));
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (T v : a.row(i)) {
            out[i] += v;
        }
    }
    return out;
}

template <std::floating_point T>
void require_square(const Matrix<T>& a, std::size_t n, const char* op) {
    if (a.rows() != n || a.cols() != n) {
        throw DimensionError(std::string(op) + ": expected " + shape_string(n, n) + ", got " +
                             shape_string(a));
    }
}

} // namespace

template <std::floating_point T>
Matrix<T> project(const Matrix<T>& features, const MetricFactor<T>& metric) {
    if (features.cols() != metric.feature_dim()) {
        throw DimensionError("project: features " + shape_string(features) + " vs metric " +
                             shape_string(metric.factor()));
    }
    return linalg::matmul(features, metric.factor());
}

template <std::floating_point T>
Matrix<T> pairwise_squared_distances(const Matrix<T>& x) {
    const std::size_t n = x.rows();
    const std::size_t k = x.cols();
    Matrix<T> out(n, n);
    const auto rows = static_cast<std::int64_t>(n);
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic, 16)
#endif
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const T* xi = x.data() + i * k;
        for (std::size_t j = i + 1; j < n; ++j) {
            const T* xj = x.data() + j * k;
            T acc = T(0);
            for (std::size_t c = 0; c < k; ++c) {
                const T diff = xi[c] - xj[c];
                acc += diff * diff;
            }
            out(i, j) = acc;
            out(j, i) = acc;
        }
    }
    linalg::ensure_finite(out, "pairwise_squared_distances");
    return out;
}

template <std::floating_point T>
Matrix<T> mahalanobis_distances(const Matrix<T>& features, const MetricFactor<T>& metric) {
    Matrix<T> d = pairwise_squared_distances(project(features, metric));
    for (auto& v : d.values()) {
        v = std::sqrt(v);
    }
    return d;
}

template <std::floating_point T>
LearnedGraph<T> kernel_from_squared(const Matrix<T>& squared_distances) {
    const std::size_t n = squared_distances.rows();
    require_square(squared_distances, n, "kernel_adjacency");
    LearnedGraph<T> g;
    g.adjacency = Matrix<T>(n, n);
    for (std::size_t i = 0; i < squared_distances.size(); ++i) {
        const T d2 = squared_distances.values()[i];
        if (d2 < T(0)) {
            throw DimensionError("kernel_adjacency: negative squared distance");
        }
        g.adjacency.values()[i] = std::exp(-d2);
    }
    g.degree = row_sums(g.adjacency);
    return g;
}

template <std::floating_point T>
LearnedGraph<T> kernel_adjacency(const Matrix<T>& distances) {
    Matrix<T> sq = distances;
    for (auto& v : sq.values()) {
        v = v * v;
    }
    return kernel_from_squared(sq);
}

template <std::floating_point T>
T glr(const LearnedGraph<T>& graph, const Matrix<T>& signal) {
    const std::size_t n = graph.nodes();
    if (signal.rows() != n) {
        throw DimensionError("glr: signal has " + std::to_string(signal.rows()) +
                             " rows for a graph of " + std::to_string(n) + " nodes");
    }
    return glr_from_squared(graph.adjacency, squared_distances_any_width(signal));
}

template <std::floating_point T>
Matrix<T> signal_squared_distances(const Matrix<T>& signal) {
    return squared_distances_any_width(signal);
}

template <std::floating_point T>
T glr_from_squared(const Matrix<T>& adjacency, const Matrix<T>& squared) {
    const std::size_t n = adjacency.rows();
    require_square(adjacency, n, "glr");
    require_square(squared, n, "glr");
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T* a = adjacency.data() + i * n;
        const T* d = squared.data() + i * n;
        for (std::size_t j = i + 1; j < n; ++j) {
            total += a[j] * d[j];
        }
    }
    return total;
}

template <std::floating_point T>
T glr_quadratic_form(const LearnedGraph<T>& graph, const Matrix<T>& signal) {
    const Matrix<T> lx = linalg::matmul(graph.laplacian(), signal);
    T total = T(0);
    for (std::size_t i = 0; i < signal.size(); ++i) {
        total += signal.values()[i] * lx.values()[i];
    }
    return total;
}

template <std::floating_point T>
Renormalized<T> renormalize_accumulated(Matrix<T> accumulated) {
    const std::size_t n = accumulated.rows();
    require_square(accumulated, n, "renormalize");
    Renormalized<T> out;
    const std::vector<T> deg = row_sums(accumulated);
    out.inv_sqrt_degree.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(deg[i] > T(0))) {
            throw DegenerateGraphError("renormalize: node " + std::to_string(i) +
                                       " has non-positive degree " + std::to_string(deg[i]));
        }
        out.inv_sqrt_degree[i] = T(1) / std::sqrt(deg[i]);
    }
    out.normalized = Matrix<T>(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const T qi = out.inv_sqrt_degree[i];
        for (std::size_t j = 0; j < n; ++j) {
            out.normalized(i, j) = qi * accumulated(i, j) * out.inv_sqrt_degree[j];
        }
    }
    linalg::ensure_finite(out.normalized, "renormalize");
    out.accumulated = std::move(accumulated);
    return out;
}

template <std::floating_point T>
Renormalized<T> renormalize_full(const Matrix<T>& a_prev, const Matrix<T>& a_star) {
    require_square(a_prev, a_star.rows(), "renormalize");
    return renormalize_accumulated(linalg::add(a_prev, a_star));
}

template <std::floating_point T>
Matrix<T> renormalize(const Matrix<T>& a_prev, const LearnedGraph<T>& a_star) {
    return renormalize_full(a_prev, a_star.adjacency).normalized;
}

template <std::floating_point T>
Matrix<T> renormalize_backward(const Renormalized<T>& forward, const Matrix<T>& d_normalized) {
    const std::size_t n = forward.normalized.rows();
    require_square(d_normalized, n, "renormalize_backward");
    const auto& q = forward.inv_sqrt_degree;
    const auto& a_hat = forward.normalized;

    // Both the row and the column scaling of node k depend on deg_k.
    std::vector<T> weighted(n, T(0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const T v = d_normalized(i, j) * a_hat(i, j);
            weighted[i] += v;
            weighted[j] += v;
        }
    }
    std::vector<T> d_degree(n);
    for (std::size_t k = 0; k < n; ++k) {
        d_degree[k] = T(-0.5) * q[k] * q[k] * weighted[k];
    }

    Matrix<T> d_acc(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            d_acc(i, j) = d_normalized(i, j) * q[i] * q[j] + d_degree[i];
        }
    }
    linalg::ensure_finite(d_acc, "renormalize_backward");
    return d_acc;
}

template <std::floating_point T>
Matrix<T> glr_signal_gradient(const LearnedGraph<T>& graph, const Matrix<T>& signal) {
    const std::size_t n = graph.nodes();
    if (signal.rows() != n) {
        throw DimensionError("glr_signal_gradient: signal rows mismatch");
    }
    Matrix<T> ax = symmetric_times(graph.adjacency, signal);
    Matrix<T> out(n, signal.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const T d = graph.degree[i];
        for (std::size_t c = 0; c < signal.cols(); ++c) {
            out(i, c) = T(2) * (d * signal(i, c) - ax(i, c));
        }
    }
    linalg::ensure_finite(out, "glr_signal_gradient");
    return out;
}

template <std::floating_point T>
Matrix<T> glr_adjacency_gradient(const Matrix<T>& signal) {
    Matrix<T> s = squared_distances_any_width(signal);
    for (auto& v : s.values()) {
        v *= T(0.5);
    }
    return s;
}

template <std::floating_point T>
void kernel_backward(const Matrix<T>& features, const MetricFactor<T>& metric,
                     const Matrix<T>& projected, const Matrix<T>& a_star,
                     const Matrix<T>& d_a_star, Matrix<T>& d_r, Matrix<T>* d_features) {
    const std::size_t n = a_star.rows();
    require_square(d_a_star, n, "kernel_backward");

    // a_ij = exp(-D_ij) with D_ij = ||g_i - g_j||^2, so dE/dD_ij = -a_ij dE/da_ij.
    // Both ordered entries share D, giving the symmetric weight
    // m_ij = dE/dD_ij + dE/dD_ji and dE/dg_i = 2 sum_j m_ij (g_i - g_j).
    Matrix<T> m(n, n);
    std::vector<T> m_rows(n, T(0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            const T v = -(a_star(i, j) * d_a_star(i, j) + a_star(j, i) * d_a_star(j, i));
            m(i, j) = v;
            m_rows[i] += v;
        }
    }
    Matrix<T> d_proj = linalg::matmul(m, projected);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < projected.cols(); ++s) {
            d_proj(i, s) = T(2) * (m_rows[i] * projected(i, s) - d_proj(i, s));
        }
    }
    linalg::accumulate(d_r, linalg::matmul_tn(features, d_proj));
    if (d_features != nullptr) {
        linalg::accumulate(*d_features, linalg::matmul_nt(d_proj, metric.factor()));
    }
}

template <std::floating_point T>
GraphGradients<T> backward_through_graph(const Matrix<T>& features,
                                         const MetricFactor<T>& metric,
                                         const Matrix<T>& a_prev,
                                         const Matrix<T>& upstream, T glr_weight,
                                         const Matrix<T>* glr_signal) {
    const std::size_t n = features.rows();
    require_square(a_prev, n, "backward_through_graph");
    require_square(upstream, n, "backward_through_graph");

    const Matrix<T> projected = project(features, metric);
    const LearnedGraph<T> a_star = kernel_from_squared(pairwise_squared_distances(projected));
    const Renormalized<T> forward = renormalize_full(a_prev, a_star.adjacency);

    GraphGradients<T> grads;
    grads.d_a_prev = renormalize_backward(forward, upstream);
    Matrix<T> d_a_star = grads.d_a_prev;
    grads.d_r = Matrix<T>(metric.feature_dim(), metric.rank());
    grads.d_features = Matrix<T>(n, features.cols());

    const Matrix<T>& signal = glr_signal != nullptr ? *glr_signal : features;
    if (glr_weight != T(0)) {
        linalg::accumulate(d_a_star, glr_adjacency_gradient(signal), glr_weight);
        Matrix<T> d_signal = linalg::scale(glr_signal_gradient(a_star, signal), glr_weight);
        if (glr_signal != nullptr) {
            grads.d_signal = std::move(d_signal);
        } else {
            grads.d_features = std::move(d_signal);
        }
    } else if (glr_signal != nullptr) {
        grads.d_signal = Matrix<T>(signal.rows(), signal.cols());
    }
    kernel_backward(features, metric, projected, a_star.adjacency, d_a_star, grads.d_r,
                    &grads.d_features);
    return grads;
}

#define JLGCN_INSTANTIATE_GRAPH(T)                                                           \
    template Matrix<T> project<T>(const Matrix<T>&, const MetricFactor<T>&);                 \
    template Matrix<T> pairwise_squared_distances<T>(const Matrix<T>&);                      \
    template Matrix<T> mahalanobis_distances<T>(const Matrix<T>&, const MetricFactor<T>&);   \
    template LearnedGraph<T> kernel_adjacency<T>(const Matrix<T>&);                          \
    template LearnedGraph<T> kernel_from_squared<T>(const Matrix<T>&);                       \
    template T glr<T>(const LearnedGraph<T>&, const Matrix<T>&);                             \
    template T glr_quadratic_form<T>(const LearnedGraph<T>&, const Matrix<T>&);              \
    template Matrix<T> renormalize<T>(const Matrix<T>&, const LearnedGraph<T>&);             \
    template Renormalized<T> renormalize_full<T>(const Matrix<T>&, const Matrix<T>&);        \
    template Renormalized<T> renormalize_accumulated<T>(Matrix<T>);                          \
    template Matrix<T> renormalize_backward<T>(const Renormalized<T>&, const Matrix<T>&);    \
    template Matrix<T> glr_signal_gradient<T>(const LearnedGraph<T>&, const Matrix<T>&);     \
    template Matrix<T> glr_adjacency_gradient<T>(const Matrix<T>&);                          \
    template void kernel_backward<T>(const Matrix<T>&, const MetricFactor<T>&,               \
                                     const Matrix<T>&, const Matrix<T>&, const Matrix<T>&,   \
                                     Matrix<T>&, Matrix<T>*);                                \
    template Matrix<T> signal_squared_distances<T>(const Matrix<T>&);                        \
    template T glr_from_squared<T>(const Matrix<T>&, const Matrix<T>&);                      \
    template GraphGradients<T> backward_through_graph<T>(                                    \
        const Matrix<T>&, const MetricFactor<T>&, const Matrix<T>&, const Matrix<T>&, T,     \
        const Matrix<T>*);

JLGCN_INSTANTIATE_GRAPH(float)
JLGCN_INSTANTIATE_GRAPH(double)

#undef JLGCN_INSTANTIATE_GRAPH

} // namespace graph

template class MetricFactor<float>;
template class MetricFactor<double>;
template struct LearnedGraph<float>;
template struct LearnedGraph<double>;

} // namespace jlgcn
