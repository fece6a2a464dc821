#ifndef JLGCN_LINALG_HPP
#define JLGCN_LINALG_HPP

#include "jlgcn/matrix.hpp"
#include "jlgcn/rng.hpp"

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

/// Dense kernels and elementwise neural-network operations.
///
/// Summation order: every reduction accumulates its terms in ascending index
/// order into a single accumulator that starts at zero. Products may be split
/// across threads by output row only, so each element is produced by exactly
/// one thread in the same order and results are bit-identical regardless of
/// thread count. Every public operation rejects non-finite results with
/// NumericError.
namespace jlgcn::linalg {

/// Throws NumericError naming `op` if any entry is NaN or Inf.
template <std::floating_point T>
void ensure_finite(const Matrix<T>& m, const char* op);

template <std::floating_point T>
bool all_finite(const Matrix<T>& m) noexcept;

/// a * b
template <std::floating_point T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);

/// transpose(a) * b without materializing the transpose.
template <std::floating_point T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b);

/// a * transpose(b) without materializing the transpose.
template <std::floating_point T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b);

template <std::floating_point T>
Matrix<T> transpose(const Matrix<T>& a);

template <std::floating_point T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b);

template <std::floating_point T>
Matrix<T> subtract(const Matrix<T>& a, const Matrix<T>& b);

template <std::floating_point T>
Matrix<T> scale(const Matrix<T>& a, T s);

template <std::floating_point T>
Matrix<T> hadamard(const Matrix<T>& a, const Matrix<T>& b);

/// dst += alpha * src
template <std::floating_point T>
void accumulate(Matrix<T>& dst, const Matrix<T>& src, T alpha = T(1));

/// [a | b] along the feature (column) axis.
template <std::floating_point T>
Matrix<T> hconcat(const Matrix<T>& a, const Matrix<T>& b);

/// Columns [begin, end) of a.
template <std::floating_point T>
Matrix<T> column_block(const Matrix<T>& a, std::size_t begin, std::size_t end);

/// Rows [begin, end) of a.
template <std::floating_point T>
Matrix<T> row_block(const Matrix<T>& a, std::size_t begin, std::size_t end);

/// max(x, slope * x) elementwise; slope in (0, 1).
template <std::floating_point T>
Matrix<T> leaky_relu(const Matrix<T>& x, T slope);

/// Gradient of leaky_relu given the forward input `x`.
template <std::floating_point T>
Matrix<T> leaky_relu_backward(const Matrix<T>& upstream, const Matrix<T>& x, T slope);

/// Row-wise softmax with max subtraction.
template <std::floating_point T>
Matrix<T> row_softmax(const Matrix<T>& x);

/// Multiplicative inverted-dropout mask: entries are 0 or 1/(1-p).
/// One uniform draw per entry in row-major order.
template <std::floating_point T>
Matrix<T> dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng);

/// Inverted dropout. Exact identity (no draws) when !training or p == 0.
template <std::floating_point T>
Matrix<T> dropout(const Matrix<T>& x, double p, Rng& rng, bool training);

/// Glorot/Xavier uniform: U(-l, l), l = sqrt(6 / (rows + cols)).
template <std::floating_point T>
Matrix<T> glorot_init(std::size_t rows, std::size_t cols, Rng& rng);

/// i.i.d. N(0, stddev^2) entries.
template <std::floating_point T>
Matrix<T> normal_init(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

/// Scales each row to unit L2 norm; all-zero rows stay zero.
template <std::floating_point T>
Matrix<T> l2_normalize_rows(const Matrix<T>& x);

template <std::floating_point T>
std::vector<T> row_max(const Matrix<T>& x);

/// Index of the first maximum in each row.
template <std::floating_point T>
std::vector<std::size_t> argmax_rows(const Matrix<T>& x);

template <std::floating_point T>
T sum(const Matrix<T>& x);

template <std::floating_point T>
T frobenius_norm(const Matrix<T>& x);

template <std::floating_point T>
T max_abs_diff(const Matrix<T>& a, const Matrix<T>& b);

template <std::floating_point T>
bool is_symmetric(const Matrix<T>& a, T tol);

/// Diagonal matrix with `d` on the diagonal.
template <std::floating_point T>
Matrix<T> diagonal(std::span<const T> d);

} // namespace jlgcn::linalg

#endif // JLGCN_LINALG_HPP
