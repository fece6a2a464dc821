#ifndef JLGCN_MODEL_HPP
#define JLGCN_MODEL_HPP

#include "jlgcn/layer.hpp"
#include "jlgcn/matrix.hpp"
#include "jlgcn/optim.hpp"
#include "jlgcn/rng.hpp"

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

namespace jlgcn {

/// Options shared by the layers of a network.
struct LayerOptions {
    LayerMode mode = LayerMode::jlgcn;
    std::size_t rank = 16;  ///< clipped to each layer's input width
    GraphFrom graph_from = GraphFrom::pre_dropout;
    GlrSignal glr_signal = GlrSignal::input;
    GraphAccumulation accumulation = GraphAccumulation::raw;
    bool bias = false;
    MetricInit r_init = MetricInit::random;
    double r_std = 1.0;
    bool decay_metric = true;  ///< weight decay also applies to R

    /// Metric rank used for a layer with input width `in_dim`.
    std::size_t rank_for(std::size_t in_dim) const noexcept;
};

struct NodeNetConfig {
    std::vector<std::size_t> widths;  ///< input width, hidden widths..., class count
    LayerOptions layer;
    double dropout = 0.5;
    bool dropout_all_layers = false;  ///< default: only the last layer's input
    double leaky_slope = 0.2;

    void validate() const;
};

struct GraphNetConfig {
    std::size_t in_dim = 3;
    std::vector<std::size_t> widths{64, 128, 1024};  ///< graph layers
    std::vector<std::size_t> head{512, 256};         ///< hidden fully connected widths
    std::size_t classes = 40;
    LayerOptions layer{.mode = LayerMode::jlgcn_concat};
    double head_dropout = 0.5;
    double leaky_slope = 0.2;
    double bn_momentum = 0.9;  ///< running = momentum * running + (1 - momentum) * batch
    double bn_eps = 1e-5;

    void validate() const;
};

template <std::floating_point T>
struct NetOutput {
    Matrix<T> logits;
    T glr_total = T(0);
};

/// Stacked layers for semi-supervised node classification on one graph.
template <std::floating_point T>
class NodeClassifierNet {
public:
    NodeClassifierNet() = default;
    NodeClassifierNet(const NodeNetConfig& config, Rng& rng);

    /// Leaky ReLU between layers; dropout per config when training.
    /// glr_total sums every layer's regularizer.
    NetOutput<T> forward(const Matrix<T>& features, const Matrix<T>& graph, bool training,
                         Rng* rng = nullptr);

    /// Gradients of (d_logits . logits + glr_weight * glr_total), aligned
    /// with parameters(). Requires a preceding training-mode forward.
    std::vector<Matrix<T>> backward(const Matrix<T>& d_logits, T glr_weight);

    std::vector<ParamRef<T>> parameters();

    /// Eval-mode kernel adjacency A* of every layer (empty for plain layers).
    std::vector<Matrix<T>> learned_adjacencies(const Matrix<T>& features,
                                               const Matrix<T>& graph) const;

    const NodeNetConfig& config() const noexcept { return config_; }
    std::vector<LayerState<T>>& layers() noexcept { return layers_; }
    const std::vector<LayerState<T>>& layers() const noexcept { return layers_; }

private:
    NodeNetConfig config_;
    std::vector<LayerState<T>> layers_;
    std::vector<Matrix<T>> pre_activation_;
    bool cached_ = false;
};

template <std::floating_point T>
struct BatchNormParams {
    Matrix<T> gamma;  ///< 1 x C
    Matrix<T> beta;
    Matrix<T> running_mean;
    Matrix<T> running_var;
};

template <std::floating_point T>
struct DenseParams {
    Matrix<T> w;
    Matrix<T> b;  ///< 1 x out
};

/// Per-instance graph layers with batch normalization, graph max pooling
/// and a fully connected head.
template <std::floating_point T>
class GraphClassifierNet {
public:
    GraphClassifierNet() = default;
    GraphClassifierNet(const GraphNetConfig& config, Rng& rng);

    /// Logits B x C. glr_total sums over layers the batch mean of the
    /// per-instance regularizers. `rng` is required for training dropout.
    NetOutput<T> forward(std::span<const Matrix<T>> batch, bool training, Rng* rng = nullptr);

    /// Gradients aligned with parameters().
    std::vector<Matrix<T>> backward(const Matrix<T>& d_logits, T glr_weight);

    std::vector<ParamRef<T>> parameters();
    /// Non-trainable state (batch-norm running statistics).
    std::vector<ParamRef<T>> buffers();

    const GraphNetConfig& config() const noexcept { return config_; }

private:
    struct LayerBatch {
        std::vector<LayerCache<T>> instances;
        Matrix<T> x_hat;           ///< normalized pre-activation, stacked
        std::vector<T> inv_std;
        Matrix<T> bn_out;          ///< input of the activation
    };
    struct HeadCache {
        Matrix<T> input;  ///< after dropout
        Matrix<T> pre;    ///< pre-activation
        Matrix<T> mask;   ///< dropout mask applied to this layer's output
    };

    GraphNetConfig config_;
    std::vector<LayerParams<T>> layers_;
    std::vector<BatchNormParams<T>> bn_;
    std::vector<DenseParams<T>> head_;

    bool cached_ = false;
    std::vector<std::size_t> offsets_;  ///< B + 1 row offsets into stacked features
    std::vector<LayerBatch> layer_cache_;
    std::vector<std::vector<std::size_t>> pool_index_;  ///< [b][c] stacked row of the max
    std::vector<HeadCache> head_cache_;
};

} // namespace jlgcn

#endif // JLGCN_MODEL_HPP
