#include "jlgcn/loss.hpp"

#include "jlgcn/errors.hpp"
#include "jlgcn/linalg.hpp"

#include <cmath>
#include <string>

namespace jlgcn {

std::string_view to_string(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

Reduction parse_reduction(std::string_view s) {
    if (s == "mean") {
        return Reduction::mean;
    }
    if (s == "sum") {
        return Reduction::sum;
    }
    throw ConfigError("unknown reduction '" + std::string(s) + "'");
}

namespace {

void check_inputs(std::size_t rows, std::span<const int> labels, const Mask& mask) {
    if (labels.size() != rows || mask.size() != rows) {
        throw DimensionError("loss: " + std::to_string(rows) + " rows, " +
                             std::to_string(labels.size()) + " labels, " +
                             std::to_string(mask.size()) + " mask entries");
    }
}

} // namespace

template <std::floating_point T>
CrossEntropy<T> cross_entropy(const Matrix<T>& logits, std::span<const int> labels,
                              const Mask& mask, Reduction reduction) {
    check_inputs(logits.rows(), labels, mask);
    const std::size_t c = logits.cols();
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) {
            continue;
        }
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
            throw IndexError("cross_entropy: label " + std::to_string(labels[i]) + " of row " +
                             std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
        }
        ++count;
    }
    if (count == 0) {
        throw EmptyMaskError("cross_entropy: empty mask");
    }
    const double scale = reduction == Reduction::mean ? 1.0 / static_cast<double>(count) : 1.0;

    CrossEntropy<T> out;
    out.d_logits = Matrix<T>(logits.rows(), c);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        if (!mask[i]) {
            continue;
        }
        const auto row = logits.row(i);
        double mx = static_cast<double>(row[0]);
        for (T v : row) {
            mx = std::max(mx, static_cast<double>(v));
        }
        double z = 0.0;
        for (T v : row) {
            z += std::exp(static_cast<double>(v) - mx);
        }
        const double lse = mx + std::log(z);
        const auto y = static_cast<std::size_t>(labels[i]);
        total += lse - static_cast<double>(row[y]);
        auto d = out.d_logits.row(i);
        for (std::size_t k = 0; k < c; ++k) {
            const double p = std::exp(static_cast<double>(row[k]) - lse);
            d[k] = static_cast<T>(scale * (p - (k == y ? 1.0 : 0.0)));
        }
    }
    out.loss = static_cast<T>(total * scale);
    if (!std::isfinite(static_cast<double>(out.loss))) {
        throw NumericError("cross_entropy: non-finite loss");
    }
    return out;
}

template <std::floating_point T>
T joint_loss(const Matrix<T>& logits, std::span<const int> labels, const Mask& mask,
             T glr_total, T lambda, Reduction reduction) {
    if (!(lambda >= T(0))) {
        throw ConfigError("joint_loss: lambda must be non-negative");
    }
    const T ce = cross_entropy(logits, labels, mask, reduction).loss;
    return lambda == T(0) ? ce : ce + lambda * glr_total;
}

template <std::floating_point T>
double accuracy(const Matrix<T>& logits, std::span<const int> labels, const Mask& mask) {
    check_inputs(logits.rows(), labels, mask);
    const auto pred = linalg::argmax_rows(logits);
    std::size_t hit = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            ++count;
            hit += static_cast<int>(pred[i]) == labels[i] ? 1 : 0;
        }
    }
    return count == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(count);
}

#define JLGCN_INSTANTIATE_LOSS(T)                                                            \
    template CrossEntropy<T> cross_entropy<T>(const Matrix<T>&, std::span<const int>,       \
                                              const Mask&, Reduction);                      \
    template T joint_loss<T>(const Matrix<T>&, std::span<const int>, const Mask&, T, T,     \
                             Reduction);                                                     \
    template double accuracy<T>(const Matrix<T>&, std::span<const int>, const Mask&);

JLGCN_INSTANTIATE_LOSS(float)
JLGCN_INSTANTIATE_LOSS(double)

} // namespace jlgcn
