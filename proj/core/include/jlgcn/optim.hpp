#ifndef JLGCN_OPTIM_HPP
#define JLGCN_OPTIM_HPP

#include "jlgcn/matrix.hpp"

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace jlgcn {

/// A named trainable tensor owned by a model.
template <std::floating_point T>
struct ParamRef {
    std::string name;
    Matrix<T>* value = nullptr;
    bool decay = true;  ///< receives weight decay
};

struct AdamConfig {
    double lr = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-4;
    double decay_factor = 0.5;       ///< step schedule multiplier
    std::size_t decay_period = 100;  ///< epochs between decays; 0 disables

    void validate() const;
};

/// lr * decay_factor ^ floor(epoch / decay_period).
double scheduled_lr(const AdamConfig& config, std::size_t epoch);

/// Adam with L2 weight decay folded into the gradient (grad + wd * param).
template <std::floating_point T>
class Adam {
public:
    explicit Adam(AdamConfig config = {});

    /// One update of every parameter at learning rate `lr`. Moments are
    /// created lazily on the first call and must keep matching shapes.
    void step(std::span<const ParamRef<T>> params, std::span<const Matrix<T>> grads, double lr);

    std::uint64_t steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    std::uint64_t t_ = 0;
    std::vector<Matrix<T>> m_;
    std::vector<Matrix<T>> v_;
};

} // namespace jlgcn

#endif // JLGCN_OPTIM_HPP
