#ifndef JLGCN_LOSS_HPP
#define JLGCN_LOSS_HPP

#include "jlgcn/matrix.hpp"

#include <concepts>
#include <span>
#include <string_view>
#include <vector>

namespace jlgcn {

/// Node mask; entry i selects row i.
using Mask = std::vector<bool>;

enum class Reduction { mean, sum };

std::string_view to_string(Reduction r);
Reduction parse_reduction(std::string_view s);

template <std::floating_point T>
struct CrossEntropy {
    T loss = T(0);
    Matrix<T> d_logits;  ///< zero on unmasked rows
};

/// Softmax cross-entropy over the masked rows, via log-sum-exp.
/// Throws EmptyMaskError when no row is selected and IndexError on a
/// masked row whose label is outside [0, C).
template <std::floating_point T>
CrossEntropy<T> cross_entropy(const Matrix<T>& logits, std::span<const int> labels,
                              const Mask& mask, Reduction reduction = Reduction::mean);

/// cross_entropy + lambda * glr_total.
template <std::floating_point T>
T joint_loss(const Matrix<T>& logits, std::span<const int> labels, const Mask& mask,
             T glr_total, T lambda, Reduction reduction = Reduction::mean);

/// Fraction of masked rows whose argmax equals the label; 0 for an empty mask.
template <std::floating_point T>
double accuracy(const Matrix<T>& logits, std::span<const int> labels, const Mask& mask);

} // namespace jlgcn

#endif // JLGCN_LOSS_HPP
