#include "jlgcn/optim.hpp"

#include "jlgcn/errors.hpp"
#include "jlgcn/linalg.hpp"

#include <cmath>

namespace jlgcn {

void AdamConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw ConfigError("adam: lr must be a finite non-negative number");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("adam: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) {
        throw ConfigError("adam: eps must be positive");
    }
    if (!(weight_decay >= 0.0)) {
        throw ConfigError("adam: weight_decay must be non-negative");
    }
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
        throw ConfigError("adam: decay_factor must lie in (0, 1]");
    }
}

double scheduled_lr(const AdamConfig& config, std::size_t epoch) {
    if (config.decay_period == 0) {
        return config.lr;
    }
    const auto k = static_cast<double>(epoch / config.decay_period);
    return config.lr * std::pow(config.decay_factor, k);
}

template <std::floating_point T>
Adam<T>::Adam(AdamConfig config) : config_(config) {
    config_.validate();
}

template <std::floating_point T>
void Adam<T>::step(std::span<const ParamRef<T>> params, std::span<const Matrix<T>> grads,
                   double lr) {
    if (params.size() != grads.size()) {
        throw DimensionError("adam: " + std::to_string(params.size()) + " parameters but " +
                             std::to_string(grads.size()) + " gradients");
    }
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value->rows(), p.value->cols());
            v_.emplace_back(p.value->rows(), p.value->cols());
        }
    }
    if (m_.size() != params.size()) {
        throw DimensionError("adam: parameter count changed between steps");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!grads[k].same_shape(*params[k].value) || !m_[k].same_shape(grads[k])) {
            throw DimensionError("adam: gradient of '" + params[k].name + "' is " +
                                 shape_string(grads[k]) + ", parameter is " +
                                 shape_string(*params[k].value));
        }
    }

    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k].value->values();
        auto g = grads[k].values();
        auto m = m_[k].values();
        auto v = v_[k].values();
        const double wd = params[k].decay ? config_.weight_decay : 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = static_cast<double>(g[i]) + wd * static_cast<double>(w[i]);
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            w[i] -= static_cast<T>(lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps));
        }
        linalg::ensure_finite(*params[k].value, "adam step");
    }
}

template class Adam<float>;
template class Adam<double>;

} // namespace jlgcn
