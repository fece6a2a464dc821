#include "jlgcn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace jlgcn::linalg {

namespace {

template <std::floating_point T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape " + shape_string(a) + " vs " +
                             shape_string(b));
    }
}

} // namespace

template <std::floating_point T>
bool all_finite(const Matrix<T>& m) noexcept {
    return std::all_of(m.values().begin(), m.values().end(),
                       [](T v) { return std::isfinite(v); });
}

template <std::floating_point T>
void ensure_finite(const Matrix<T>& m, const char* op) {
    if (!all_finite(m)) {
        throw NumericError(std::string(op) + ": non-finite value in " + shape_string(m) +
                           " result");
    }
}

template <std::floating_point T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + shape_string(a) + " x " + shape_string(b));
    }
    const std::size_t n = a.rows();
    const std::size_t inner = a.cols();
    const std::size_t m = b.cols();
    Matrix<T> out(n, m);
    const auto rows = static_cast<std::int64_t>(n);
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        T* out_row = out.data() + i * m;
        const T* a_row = a.data() + i * inner;
        for (std::size_t k = 0; k < inner; ++k) {
            const T aik = a_row[k];
            if (aik == T(0)) {
                continue;
            }
            const T* b_row = b.data() + k * m;
            for (std::size_t j = 0; j < m; ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    ensure_finite(out, "matmul");
    return out;
}

template <std::floating_point T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: " + shape_string(a) + "^T x " + shape_string(b));
    }
    const std::size_t inner = a.rows();
    const std::size_t n = a.cols();
    const std::size_t m = b.cols();
    Matrix<T> out(n, m);
    // Output rows are processed in blocks so that a is read along its rows.
    constexpr std::size_t kBlock = 64;
    const auto blocks = static_cast<std::int64_t>((n + kBlock - 1) / kBlock);
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t bb = 0; bb < blocks; ++bb) {
        const std::size_t lo = static_cast<std::size_t>(bb) * kBlock;
        const std::size_t hi = std::min(n, lo + kBlock);
        for (std::size_t k = 0; k < inner; ++k) {
            const T* a_row = a.data() + k * n;
            const T* b_row = b.data() + k * m;
            for (std::size_t i = lo; i < hi; ++i) {
                const T aki = a_row[i];
                if (aki == T(0)) {
                    continue;
                }
                T* out_row = out.data() + i * m;
                for (std::size_t j = 0; j < m; ++j) {
                    out_row[j] += aki * b_row[j];
                }
            }
        }
    }
    ensure_finite(out, "matmul_tn");
    return out;
}

template <std::floating_point T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: " + shape_string(a) + " x " + shape_string(b) + "^T");
    }
    // Same accumulation order as the dot-product form, but the inner loop
    // runs over contiguous output entries.
    return matmul(a, transpose(b));
}

template <std::floating_point T>
Matrix<T> transpose(const Matrix<T>& a) {
    Matrix<T> out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

template <std::floating_point T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b) {
    require_same_shape(a, b, "add");
    Matrix<T> out = a;
    auto o = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] += bv[i];
    }
    ensure_finite(out, "add");
    return out;
}

template <std::floating_point T>
Matrix<T> subtract(const Matrix<T>& a, const Matrix<T>& b) {
    require_same_shape(a, b, "subtract");
    Matrix<T> out = a;
    auto o = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] -= bv[i];
    }
    ensure_finite(out, "subtract");
    return out;
}

template <std::floating_point T>
Matrix<T> scale(const Matrix<T>& a, T s) {
    Matrix<T> out = a;
    for (auto& v : out.values()) {
        v *= s;
    }
    ensure_finite(out, "scale");
    return out;
}

template <std::floating_point T>
Matrix<T> hadamard(const Matrix<T>& a, const Matrix<T>& b) {
    require_same_shape(a, b, "hadamard");
    Matrix<T> out = a;
    auto o = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] *= bv[i];
    }
    ensure_finite(out, "hadamard");
    return out;
}

template <std::floating_point T>
void accumulate(Matrix<T>& dst, const Matrix<T>& src, T alpha) {
    require_same_shape(dst, src, "accumulate");
    auto d = dst.values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] += alpha * s[i];
    }
    ensure_finite(dst, "accumulate");
}

template <std::floating_point T>
Matrix<T> hconcat(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("hconcat: " + shape_string(a) + " | " + shape_string(b));
    }
    Matrix<T> out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
        std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
    }
    return out;
}

template <std::floating_point T>
Matrix<T> column_block(const Matrix<T>& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.cols()) {
        throw DimensionError("column_block: range out of " + shape_string(a));
    }
    Matrix<T> out(a.rows(), end - begin);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto src = a.row(i);
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(begin),
                  src.begin() + static_cast<std::ptrdiff_t>(end), out.row(i).begin());
    }
    return out;
}

template <std::floating_point T>
Matrix<T> row_block(const Matrix<T>& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.rows()) {
        throw DimensionError("row_block: range out of " + shape_string(a));
    }
    std::vector<T> data(a.data() + begin * a.cols(), a.data() + end * a.cols());
    return Matrix<T>(end - begin, a.cols(), std::move(data));
}

template <std::floating_point T>
Matrix<T> leaky_relu(const Matrix<T>& x, T slope) {
    if (!(slope > T(0) && slope < T(1))) {
        throw ConfigError("leaky_relu: slope must lie in (0, 1)");
    }
    Matrix<T> out = x;
    for (auto& v : out.values()) {
        v = std::max(v, slope * v);
    }
    ensure_finite(out, "leaky_relu");
    return out;
}

template <std::floating_point T>
Matrix<T> leaky_relu_backward(const Matrix<T>& upstream, const Matrix<T>& x, T slope) {
    require_same_shape(upstream, x, "leaky_relu_backward");
    Matrix<T> out = upstream;
    auto o = out.values();
    auto xv = x.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (xv[i] < T(0)) {
            o[i] *= slope;
        }
    }
    ensure_finite(out, "leaky_relu_backward");
    return out;
}

template <std::floating_point T>
Matrix<T> row_softmax(const Matrix<T>& x) {
    Matrix<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto in = x.row(i);
        auto dst = out.row(i);
        if (in.empty()) {
            continue;
        }
        const T m = *std::max_element(in.begin(), in.end());
        T total = T(0);
        for (std::size_t j = 0; j < in.size(); ++j) {
            dst[j] = std::exp(in[j] - m);
            total += dst[j];
        }
        for (auto& v : dst) {
            v /= total;
        }
    }
    ensure_finite(out, "row_softmax");
    return out;
}

template <std::floating_point T>
Matrix<T> dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("dropout: p must lie in [0, 1)");
    }
    Matrix<T> mask(rows, cols, T(1));
    if (p == 0.0) {
        return mask;
    }
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (auto& v : mask.values()) {
        v = rng.uniform() < p ? T(0) : keep_scale;
    }
    return mask;
}

template <std::floating_point T>
Matrix<T> dropout(const Matrix<T>& x, double p, Rng& rng, bool training) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("dropout: p must lie in [0, 1)");
    }
    if (!training || p == 0.0) {
        return x;
    }
    return hadamard(x, dropout_mask<T>(x.rows(), x.cols(), p, rng));
}

template <std::floating_point T>
Matrix<T> glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix<T> out(rows, cols);
    for (auto& v : out.values()) {
        v = static_cast<T>(rng.uniform(-limit, limit));
    }
    return out;
}

template <std::floating_point T>
Matrix<T> normal_init(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Matrix<T> out(rows, cols);
    for (auto& v : out.values()) {
        v = static_cast<T>(stddev * rng.normal());
    }
    return out;
}

template <std::floating_point T>
Matrix<T> l2_normalize_rows(const Matrix<T>& x) {
    Matrix<T> out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        T sq = T(0);
        for (T v : r) {
            sq += v * v;
        }
        if (sq > T(0)) {
            const T inv = T(1) / std::sqrt(sq);
            for (auto& v : r) {
                v *= inv;
            }
        }
    }
    ensure_finite(out, "l2_normalize_rows");
    return out;
}

template <std::floating_point T>
std::vector<T> row_max(const Matrix<T>& x) {
    if (x.cols() == 0) {
        throw DimensionError("row_max: matrix has no columns");
    }
    std::vector<T> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        out[i] = *std::max_element(r.begin(), r.end());
    }
    return out;
}

template <std::floating_point T>
std::vector<std::size_t> argmax_rows(const Matrix<T>& x) {
    if (x.cols() == 0) {
        throw DimensionError("argmax_rows: matrix has no columns");
    }
    std::vector<std::size_t> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

template <std::floating_point T>
T sum(const Matrix<T>& x) {
    T total = T(0);
    for (T v : x.values()) {
        total += v;
    }
    return total;
}

template <std::floating_point T>
T frobenius_norm(const Matrix<T>& x) {
    T total = T(0);
    for (T v : x.values()) {
        total += v * v;
    }
    return std::sqrt(total);
}

template <std::floating_point T>
T max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
    require_same_shape(a, b, "max_abs_diff");
    T worst = T(0);
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        worst = std::max(worst, std::abs(av[i] - bv[i]));
    }
    return worst;
}

template <std::floating_point T>
bool is_symmetric(const Matrix<T>& a, T tol) {
    if (a.rows() != a.cols()) {
        return false;
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            if (std::abs(a(i, j) - a(j, i)) > tol) {
                return false;
            }
        }
    }
    return true;
}

template <std::floating_point T>
Matrix<T> diagonal(std::span<const T> d) {
    Matrix<T> out(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        out(i, i) = d[i];
    }
    return out;
}

#define JLGCN_INSTANTIATE_LINALG(T)                                                      \
    template bool all_finite<T>(const Matrix<T>&) noexcept;                              \
    template void ensure_finite<T>(const Matrix<T>&, const char*);                       \
    template Matrix<T> matmul<T>(const Matrix<T>&, const Matrix<T>&);                    \
    template Matrix<T> matmul_tn<T>(const Matrix<T>&, const Matrix<T>&);                 \
    template Matrix<T> matmul_nt<T>(const Matrix<T>&, const Matrix<T>&);                 \
    template Matrix<T> transpose<T>(const Matrix<T>&);                                   \
    template Matrix<T> add<T>(const Matrix<T>&, const Matrix<T>&);                       \
    template Matrix<T> subtract<T>(const Matrix<T>&, const Matrix<T>&);                  \
    template Matrix<T> scale<T>(const Matrix<T>&, T);                                    \
    template Matrix<T> hadamard<T>(const Matrix<T>&, const Matrix<T>&);                  \
    template void accumulate<T>(Matrix<T>&, const Matrix<T>&, T);                        \
    template Matrix<T> hconcat<T>(const Matrix<T>&, const Matrix<T>&);                   \
    template Matrix<T> column_block<T>(const Matrix<T>&, std::size_t, std::size_t);      \
    template Matrix<T> row_block<T>(const Matrix<T>&, std::size_t, std::size_t);         \
    template Matrix<T> leaky_relu<T>(const Matrix<T>&, T);                               \
    template Matrix<T> leaky_relu_backward<T>(const Matrix<T>&, const Matrix<T>&, T);    \
    template Matrix<T> row_softmax<T>(const Matrix<T>&);                                 \
    template Matrix<T> dropout_mask<T>(std::size_t, std::size_t, double, Rng&);          \
    template Matrix<T> dropout<T>(const Matrix<T>&, double, Rng&, bool);                 \
    template Matrix<T> glorot_init<T>(std::size_t, std::size_t, Rng&);                   \
    template Matrix<T> normal_init<T>(std::size_t, std::size_t, double, Rng&);           \
    template Matrix<T> l2_normalize_rows<T>(const Matrix<T>&);                           \
    template std::vector<T> row_max<T>(const Matrix<T>&);                                \
    template std::vector<std::size_t> argmax_rows<T>(const Matrix<T>&);                  \
    template T sum<T>(const Matrix<T>&);                                                 \
    template T frobenius_norm<T>(const Matrix<T>&);                                      \
    template T max_abs_diff<T>(const Matrix<T>&, const Matrix<T>&);                      \
    template bool is_symmetric<T>(const Matrix<T>&, T);                                  \
    template Matrix<T> diagonal<T>(std::span<const T>);

JLGCN_INSTANTIATE_LINALG(float)
JLGCN_INSTANTIATE_LINALG(double)

#undef JLGCN_INSTANTIATE_LINALG

} // namespace jlgcn::linalg
