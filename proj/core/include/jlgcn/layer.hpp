#ifndef JLGCN_LAYER_HPP
#define JLGCN_LAYER_HPP

#include "jlgcn/graph.hpp"
#include "jlgcn/matrix.hpp"
#include "jlgcn/rng.hpp"

#include <concepts>
#include <cstddef>
#include <optional>
#include <string_view>

namespace jlgcn {

enum class LayerMode {
    plain_gcn,     ///< F' = norm(A_in + I) F W
    jlgcn,         ///< F' = norm(A_in + A*) F W, A* learned from F
    jlgcn_concat,  ///< F' = (F || norm(A_in + A*) F) W
};

/// Which features enter the graph Laplacian regularizer of a layer.
enum class GlrSignal { input, output };

/// Whether the graph is learned from the layer input before or after dropout.
enum class GraphFrom { pre_dropout, post_dropout };

/// What a layer hands to the next one: the raw accumulated graph
/// (A_in + A*) or its renormalized form.
enum class GraphAccumulation { raw, normalized };

enum class MetricInit { random, identity };

std::string_view to_string(LayerMode m);
std::string_view to_string(GlrSignal s);
std::string_view to_string(GraphFrom g);
std::string_view to_string(GraphAccumulation a);
std::string_view to_string(MetricInit r);

/// Parse helpers; throw ConfigError on unknown names.
LayerMode parse_layer_mode(std::string_view s);
GlrSignal parse_glr_signal(std::string_view s);
GraphFrom parse_graph_from(std::string_view s);
GraphAccumulation parse_graph_accumulation(std::string_view s);
MetricInit parse_metric_init(std::string_view s);

struct LayerConfig {
    LayerMode mode = LayerMode::jlgcn;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::size_t rank = 16;  ///< metric rank S; must not exceed in_dim
    double input_dropout = 0.0;
    GraphFrom graph_from = GraphFrom::pre_dropout;
    GlrSignal glr_signal = GlrSignal::input;
    GraphAccumulation accumulation = GraphAccumulation::raw;
    bool bias = false;

    bool learns_graph() const noexcept { return mode != LayerMode::plain_gcn; }
    /// Rows of W: 2 * in_dim in concatenation mode.
    std::size_t weight_rows() const noexcept {
        return mode == LayerMode::jlgcn_concat ? 2 * in_dim : in_dim;
    }
};

/// Trainable parameters of one layer.
template <std::floating_point T>
struct LayerParams {
    LayerConfig config;
    Matrix<T> w;
    std::optional<MetricFactor<T>> metric;  ///< absent in plain_gcn mode
    Matrix<T> bias;                         ///< 1 x out_dim, or empty

    /// Glorot W; R as identity (requires rank == in_dim) or N(0, r_std^2).
    static LayerParams init(const LayerConfig& config, Rng& rng,
                            MetricInit r_init = MetricInit::random, double r_std = 1.0);
};

/// Forward activations kept for backward().
template <std::floating_point T>
struct LayerCache {
    bool valid = false;
    Matrix<T> dropout_mask;      ///< empty when no dropout was applied
    Matrix<T> propagated_input;  ///< input after dropout
    Matrix<T> graph_input;       ///< features the graph was learned from
    Matrix<T> projected;         ///< graph_input * R
    Matrix<T> a_star;            ///< learned kernel adjacency
    Matrix<T> glr_squared;       ///< pairwise squared distances of the GLR signal
    Renormalized<T> renorm;
    Matrix<T> transformed;       ///< propagated_input * W (propagation block)
    Matrix<T> output;

    void clear() { *this = LayerCache{}; }
};

template <std::floating_point T>
struct LayerOutput {
    Matrix<T> features;  ///< N x out_dim
    Matrix<T> graph;     ///< graph handed to the next layer
    T glr_term = T(0);   ///< this layer's regularizer value (0 in plain_gcn)
};

template <std::floating_point T>
struct LayerGradients {
    Matrix<T> d_w;
    Matrix<T> d_r;  ///< empty in plain_gcn mode
    Matrix<T> d_bias;
    Matrix<T> d_features_in;
    Matrix<T> d_graph_in;
};

namespace layer {

/// Runs one layer. `rng` is required when training with input dropout.
/// `cache` may be null for inference; when given it is overwritten and
/// marked valid only for training-mode calls.
template <std::floating_point T>
LayerOutput<T> forward(const LayerParams<T>& params, const Matrix<T>& features_in,
                       const Matrix<T>& graph_in, bool training, Rng* rng,
                       LayerCache<T>* cache);

/// Gradients of (upstream . output + upstream_graph . graph_out
/// + glr_weight * glr_term) with respect to parameters and both inputs.
/// `upstream_graph` may be empty (no gradient from later layers' graphs).
/// With `need_input_grad` false, d_features_in is left empty and the work
/// behind it is skipped (first layer of a network).
template <std::floating_point T>
LayerGradients<T> backward(const LayerParams<T>& params, const LayerCache<T>& cache,
                           const Matrix<T>& upstream, const Matrix<T>& upstream_graph,
                           T glr_weight, bool need_input_grad = true);

} // namespace layer

/// A layer's parameters together with its single training cache.
template <std::floating_point T>
struct LayerState {
    LayerParams<T> params;
    LayerCache<T> cache;

    LayerOutput<T> forward(const Matrix<T>& features_in, const Matrix<T>& graph_in,
                           bool training, Rng* rng = nullptr) {
        if (!training) {
            cache.clear();
        }
        return layer::forward(params, features_in, graph_in, training, rng,
                              training ? &cache : nullptr);
    }

    LayerGradients<T> backward(const Matrix<T>& upstream, T glr_weight,
                               const Matrix<T>& upstream_graph = {},
                               bool need_input_grad = true) const {
        return layer::backward(params, cache, upstream, upstream_graph, glr_weight,
                               need_input_grad);
    }
};

} // namespace jlgcn

#endif // JLGCN_LAYER_HPP
