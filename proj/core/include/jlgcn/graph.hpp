#ifndef JLGCN_GRAPH_HPP
#define JLGCN_GRAPH_HPP

#include "jlgcn/matrix.hpp"

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

namespace jlgcn {

/// Low-rank factor R (K x S) of a Mahalanobis metric M = R R^T.
template <std::floating_point T>
class MetricFactor {
public:
    MetricFactor() = default;

    /// Throws ConfigError unless 1 <= S <= K.
    explicit MetricFactor(Matrix<T> r);

    std::size_t feature_dim() const noexcept { return r_.rows(); }
    std::size_t rank() const noexcept { return r_.cols(); }

    const Matrix<T>& factor() const noexcept { return r_; }
    Matrix<T>& factor() noexcept { return r_; }

    /// M = R R^T; diagnostics only.
    Matrix<T> metric() const;

private:
    Matrix<T> r_;
};

/// Dense learned graph: adjacency plus its degree vector.
template <std::floating_point T>
struct LearnedGraph {
    Matrix<T> adjacency;
    std::vector<T> degree;

    std::size_t nodes() const noexcept { return adjacency.rows(); }

    /// Combinatorial Laplacian D - A, built on request.
    Matrix<T> laplacian() const;
};

/// Output of symmetric renormalization, with what its backward pass needs.
template <std::floating_point T>
struct Renormalized {
    Matrix<T> accumulated;             ///< S = A_prev + A*
    Matrix<T> normalized;              ///< diag(q) S diag(q)
    std::vector<T> inv_sqrt_degree;    ///< q_i = (sum_j S_ij)^(-1/2)
};

template <std::floating_point T>
struct GraphGradients {
    Matrix<T> d_r;         ///< K x S
    Matrix<T> d_features;  ///< N x K
    Matrix<T> d_a_prev;    ///< N x N
    Matrix<T> d_signal;    ///< N x C; only set for an external GLR signal
};

namespace graph {

/// G = F R, the features in the projected metric space.
template <std::floating_point T>
Matrix<T> project(const Matrix<T>& features, const MetricFactor<T>& metric);

/// Entry (i, j) = ||x_i - x_j||^2 from explicit coordinate differences.
/// Symmetric with an exactly zero diagonal.
template <std::floating_point T>
Matrix<T> pairwise_squared_distances(const Matrix<T>& x);

/// Entry (i, j) = ||R^T (f_i - f_j)||_2, computed on G = F R.
template <std::floating_point T>
Matrix<T> mahalanobis_distances(const Matrix<T>& features, const MetricFactor<T>& metric);

/// Gaussian kernel a_ij = exp(-d_ij^2).
template <std::floating_point T>
LearnedGraph<T> kernel_adjacency(const Matrix<T>& distances);

/// Gaussian kernel from already-squared distances.
template <std::floating_point T>
LearnedGraph<T> kernel_from_squared(const Matrix<T>& squared_distances);

/// Graph Laplacian regularizer over unordered pairs:
/// sum_{i<j} a_ij ||x_i - x_j||^2 (= trace(X^T L X) for symmetric A).
template <std::floating_point T>
T glr(const LearnedGraph<T>& graph, const Matrix<T>& signal);

/// trace(X^T L X) through the materialized Laplacian; diagnostic route.
template <std::floating_point T>
T glr_quadratic_form(const LearnedGraph<T>& graph, const Matrix<T>& signal);

/// diag(q) (A_prev + A*) diag(q), q = rowsum^(-1/2). `a_prev` may be all zero.
/// Throws DegenerateGraphError if a row sum is not positive.
template <std::floating_point T>
Matrix<T> renormalize(const Matrix<T>& a_prev, const LearnedGraph<T>& a_star);

/// renormalize() keeping the intermediates.
template <std::floating_point T>
Renormalized<T> renormalize_full(const Matrix<T>& a_prev, const Matrix<T>& a_star);

/// Symmetric renormalization of an already accumulated graph.
template <std::floating_point T>
Renormalized<T> renormalize_accumulated(Matrix<T> accumulated);

/// Chain rule through renormalization: given dE/d(normalized), returns
/// dE/d(accumulated), including the dependence of the degrees on S.
template <std::floating_point T>
Matrix<T> renormalize_backward(const Renormalized<T>& forward, const Matrix<T>& d_normalized);

/// ||x_i - x_j||^2 for all pairs. Wide signals go through the Gram matrix,
/// which skips zero entries, so sparse bag-of-words rows cost O(nnz N).
template <std::floating_point T>
Matrix<T> signal_squared_distances(const Matrix<T>& signal);

/// glr from precomputed squared distances: sum_{i<j} a_ij s_ij.
template <std::floating_point T>
T glr_from_squared(const Matrix<T>& adjacency, const Matrix<T>& squared);

/// dE/dX of glr(A, X): 2 L X. Assumes symmetric A.
template <std::floating_point T>
Matrix<T> glr_signal_gradient(const LearnedGraph<T>& graph, const Matrix<T>& signal);

/// dE/dA_ij of glr(A, X), split evenly over (i, j) and (j, i): s_ij / 2 off
/// the diagonal, 0 on it.
template <std::floating_point T>
Matrix<T> glr_adjacency_gradient(const Matrix<T>& signal);

/// Chain rule through the kernel and the projection: given dE/dA* (full
/// matrix, entries treated independently), adds dE/dR into `d_r` and dE/dF
/// into `d_features` unless it is null; both must already have their primal
/// shapes.
/// `projected` must be project(features, metric) and `a_star` the kernel of it.
template <std::floating_point T>
void kernel_backward(const Matrix<T>& features, const MetricFactor<T>& metric,
                     const Matrix<T>& projected, const Matrix<T>& a_star,
                     const Matrix<T>& d_a_star, Matrix<T>& d_r, Matrix<T>* d_features);

/// Gradients of
///   E = sum_ij U_ij * renormalize(A_prev, A*(F, R))_ij + w * glr(A*, X)
/// with respect to R, F and A_prev, where U is `upstream` and X is
/// `glr_signal` (or F itself when null; its gradient then lands in d_features,
/// otherwise in d_signal).
template <std::floating_point T>
GraphGradients<T> backward_through_graph(const Matrix<T>& features,
                                         const MetricFactor<T>& metric,
                                         const Matrix<T>& a_prev,
                                         const Matrix<T>& upstream, T glr_weight,
                                         const Matrix<T>* glr_signal = nullptr);

} // namespace graph
} // namespace jlgcn

#endif // JLGCN_GRAPH_HPP
