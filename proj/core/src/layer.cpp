#include "jlgcn/layer.hpp"

#include "jlgcn/linalg.hpp"

#include <array>
#include <string>
#include <utility>

namespace jlgcn {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& names,
             const char* what) {
    for (const auto& [name, value] : names) {
        if (name == s) {
            return value;
        }
    }
    throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, LayerMode>, 3> kModes{{
    {"plain_gcn", LayerMode::plain_gcn},
    {"jlgcn", LayerMode::jlgcn},
    {"jlgcn_concat", LayerMode::jlgcn_concat},
}};
constexpr std::array<std::pair<std::string_view, GlrSignal>, 2> kSignals{{
    {"input", GlrSignal::input},
    {"output", GlrSignal::output},
}};
constexpr std::array<std::pair<std::string_view, GraphFrom>, 2> kGraphFrom{{
    {"pre_dropout", GraphFrom::pre_dropout},
    {"post_dropout", GraphFrom::post_dropout},
}};
constexpr std::array<std::pair<std::string_view, GraphAccumulation>, 2> kAccumulation{{
    {"raw", GraphAccumulation::raw},
    {"normalized", GraphAccumulation::normalized},
}};
constexpr std::array<std::pair<std::string_view, MetricInit>, 2> kMetricInit{{
    {"random", MetricInit::random},
    {"identity", MetricInit::identity},
}};

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::array<std::pair<std::string_view, E>, N>& names) {
    for (const auto& [name, value] : names) {
        if (value == v) {
            return name;
        }
    }
    return "?";
}

template <std::floating_point T>
void add_bias(Matrix<T>& z, const Matrix<T>& bias) {
    if (bias.empty()) {
        return;
    }
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t c = 0; c < row.size(); ++c) {
            row[c] += bias(0, c);
        }
    }
}

template <std::floating_point T>
Matrix<T> column_sums(const Matrix<T>& m) {
    Matrix<T> out(1, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out(0, c) += m(i, c);
        }
    }
    return out;
}

} // namespace

std::string_view to_string(LayerMode m) { return enum_name(m, kModes); }
std::string_view to_string(GlrSignal s) { return enum_name(s, kSignals); }
std::string_view to_string(GraphFrom g) { return enum_name(g, kGraphFrom); }
std::string_view to_string(GraphAccumulation a) { return enum_name(a, kAccumulation); }
std::string_view to_string(MetricInit r) { return enum_name(r, kMetricInit); }

LayerMode parse_layer_mode(std::string_view s) { return parse_enum(s, kModes, "layer mode"); }
GlrSignal parse_glr_signal(std::string_view s) { return parse_enum(s, kSignals, "glr_signal"); }
GraphFrom parse_graph_from(std::string_view s) { return parse_enum(s, kGraphFrom, "graph_from"); }
GraphAccumulation parse_graph_accumulation(std::string_view s) {
    return parse_enum(s, kAccumulation, "graph accumulation");
}
MetricInit parse_metric_init(std::string_view s) {
    return parse_enum(s, kMetricInit, "r_init");
}

template <std::floating_point T>
LayerParams<T> LayerParams<T>::init(const LayerConfig& config, Rng& rng, MetricInit r_init,
                                    double r_std) {
    if (config.in_dim == 0 || config.out_dim == 0) {
        throw ConfigError("layer: dimensions must be non-zero");
    }
    if (!(config.input_dropout >= 0.0 && config.input_dropout < 1.0)) {
        throw ConfigError("layer: dropout must lie in [0, 1)");
    }
    LayerParams p;
    p.config = config;
    p.w = linalg::glorot_init<T>(config.weight_rows(), config.out_dim, rng);
    if (config.learns_graph()) {
        if (config.rank < 1 || config.rank > config.in_dim) {
            throw ConfigError("layer: metric rank " + std::to_string(config.rank) +
                              " outside [1, " + std::to_string(config.in_dim) + "]");
        }
        if (r_init == MetricInit::identity) {
            if (config.rank != config.in_dim) {
                throw ConfigError("layer: identity r_init requires S == K (" +
                                  std::to_string(config.rank) +
                                  " != " + std::to_string(config.in_dim) + ")");
            }
            p.metric = MetricFactor<T>(Matrix<T>::identity(config.in_dim));
        } else {
            p.metric = MetricFactor<T>(
                linalg::normal_init<T>(config.in_dim, config.rank, r_std, rng));
        }
    }
    if (config.bias) {
        p.bias = Matrix<T>(1, config.out_dim);
    }
    return p;
}

namespace layer {

template <std::floating_point T>
LayerOutput<T> forward(const LayerParams<T>& params, const Matrix<T>& features_in,
                       const Matrix<T>& graph_in, bool training, Rng* rng,
                       LayerCache<T>* cache) {
    const LayerConfig& cfg = params.config;
    const std::size_t n = features_in.rows();
    if (features_in.cols() != cfg.in_dim) {
        throw DimensionError("layer forward: features " + shape_string(features_in) +
                             ", expected width " + std::to_string(cfg.in_dim));
    }
    if (graph_in.rows() != n || graph_in.cols() != n) {
        throw DimensionError("layer forward: graph " + shape_string(graph_in) + " for " +
                             std::to_string(n) + " nodes");
    }
    if (n == 0) {
        throw EmptyInputError("layer forward: no nodes");
    }

    LayerCache<T> local;
    LayerCache<T>& c = cache != nullptr ? *cache : local;
    c.clear();
    const bool keep = training && cache != nullptr;

    if (training && cfg.input_dropout > 0.0) {
        if (rng == nullptr) {
            throw ConfigError("layer forward: training with dropout needs an Rng");
        }
        c.dropout_mask = linalg::dropout_mask<T>(n, cfg.in_dim, cfg.input_dropout, *rng);
        c.propagated_input = linalg::hadamard(features_in, c.dropout_mask);
    } else {
        c.propagated_input = features_in;
    }

    LayerOutput<T> out;
    if (cfg.learns_graph()) {
        c.graph_input = cfg.graph_from == GraphFrom::pre_dropout ? features_in
                                                                 : c.propagated_input;
        c.projected = graph::project(c.graph_input, *params.metric);
        LearnedGraph<T> learned =
            graph::kernel_from_squared(graph::pairwise_squared_distances(c.projected));
        c.renorm = graph::renormalize_full(graph_in, learned.adjacency);
        c.a_star = std::move(learned.adjacency);
    } else {
        Matrix<T> acc = graph_in;
        for (std::size_t i = 0; i < n; ++i) {
            acc(i, i) += T(1);
        }
        c.renorm = graph::renormalize_accumulated(std::move(acc));
    }

    const Matrix<T>& a_hat = c.renorm.normalized;
    if (cfg.mode == LayerMode::jlgcn_concat) {
        const Matrix<T> w_self = linalg::row_block(params.w, 0, cfg.in_dim);
        const Matrix<T> w_prop = linalg::row_block(params.w, cfg.in_dim, 2 * cfg.in_dim);
        c.transformed = linalg::matmul(c.propagated_input, w_prop);
        c.output = linalg::matmul(c.propagated_input, w_self);
        linalg::accumulate(c.output, linalg::matmul(a_hat, c.transformed));
    } else {
        c.transformed = linalg::matmul(c.propagated_input, params.w);
        c.output = linalg::matmul(a_hat, c.transformed);
    }
    add_bias(c.output, params.bias);

    if (cfg.learns_graph()) {
        LearnedGraph<T> kernel{c.a_star, {}};
        kernel.degree.assign(n, T(0));
        for (std::size_t i = 0; i < n; ++i) {
            for (T v : c.a_star.row(i)) {
                kernel.degree[i] += v;
            }
        }
        c.glr_squared = graph::signal_squared_distances(
            cfg.glr_signal == GlrSignal::input ? c.graph_input : c.output);
        out.glr_term = graph::glr_from_squared(c.a_star, c.glr_squared);
        Matrix<T>& handed_on = cfg.accumulation == GraphAccumulation::raw
                                   ? c.renorm.accumulated
                                   : c.renorm.normalized;
        out.graph = keep ? handed_on : std::move(handed_on);
    } else {
        out.graph = graph_in;
    }
    out.features = keep ? c.output : std::move(c.output);

    if (keep) {
        c.valid = true;
    } else {
        c.clear();
    }
    return out;
}

template <std::floating_point T>
LayerGradients<T> backward(const LayerParams<T>& params, const LayerCache<T>& c,
                           const Matrix<T>& upstream, const Matrix<T>& upstream_graph,
                           T glr_weight, bool need_input_grad) {
    if (!c.valid) {
        throw MissingCacheError("layer backward: no training-mode forward cache");
    }
    const LayerConfig& cfg = params.config;
    const std::size_t n = c.output.rows();
    if (!upstream.same_shape(c.output)) {
        throw DimensionError("layer backward: upstream " + shape_string(upstream) +
                             " vs output " + shape_string(c.output));
    }
    const bool has_graph_grad = !upstream_graph.empty();
    if (has_graph_grad && (upstream_graph.rows() != n || upstream_graph.cols() != n)) {
        throw DimensionError("layer backward: upstream graph " + shape_string(upstream_graph));
    }

    LearnedGraph<T> kernel;
    if (cfg.learns_graph()) {
        kernel.adjacency = c.a_star;
        kernel.degree.assign(n, T(0));
        for (std::size_t i = 0; i < n; ++i) {
            for (T v : c.a_star.row(i)) {
                kernel.degree[i] += v;
            }
        }
    }
    const bool glr_active = cfg.learns_graph() && glr_weight != T(0);

    Matrix<T> d_out = upstream;
    if (glr_active && cfg.glr_signal == GlrSignal::output) {
        linalg::accumulate(d_out, graph::glr_signal_gradient(kernel, c.output), glr_weight);
    }

    LayerGradients<T> g;
    if (cfg.bias) {
        g.d_bias = column_sums(d_out);
    }

    const Matrix<T>& a_hat = c.renorm.normalized;
    const Matrix<T> d_transformed = linalg::matmul_tn(a_hat, d_out);
    Matrix<T> d_a_hat = linalg::matmul_nt(d_out, c.transformed);
    Matrix<T> d_prop_input;
    if (cfg.mode == LayerMode::jlgcn_concat) {
        const Matrix<T> w_self = linalg::row_block(params.w, 0, cfg.in_dim);
        const Matrix<T> w_prop = linalg::row_block(params.w, cfg.in_dim, 2 * cfg.in_dim);
        const Matrix<T> d_w_self = linalg::matmul_tn(c.propagated_input, d_out);
        const Matrix<T> d_w_prop = linalg::matmul_tn(c.propagated_input, d_transformed);
        g.d_w = Matrix<T>(params.w.rows(), params.w.cols());
        std::copy(d_w_self.values().begin(), d_w_self.values().end(), g.d_w.values().begin());
        std::copy(d_w_prop.values().begin(), d_w_prop.values().end(),
                  g.d_w.values().begin() + static_cast<std::ptrdiff_t>(d_w_self.size()));
        if (need_input_grad) {
            d_prop_input = linalg::matmul_nt(d_out, w_self);
            linalg::accumulate(d_prop_input, linalg::matmul_nt(d_transformed, w_prop));
        }
    } else {
        g.d_w = linalg::matmul_tn(c.propagated_input, d_transformed);
        if (need_input_grad) {
            d_prop_input = linalg::matmul_nt(d_transformed, params.w);
        }
    }

    if (has_graph_grad && cfg.learns_graph() &&
        cfg.accumulation == GraphAccumulation::normalized) {
        linalg::accumulate(d_a_hat, upstream_graph);
    }
    Matrix<T> d_acc = graph::renormalize_backward(c.renorm, d_a_hat);
    if (has_graph_grad &&
        (!cfg.learns_graph() || cfg.accumulation == GraphAccumulation::raw)) {
        // raw: the handed-on graph is S itself; plain: it is graph_in verbatim,
        // and graph_in enters S with unit weight, so both routes add directly.
        linalg::accumulate(d_acc, upstream_graph);
    }
    g.d_graph_in = d_acc;

    Matrix<T> d_graph_input;
    if (cfg.learns_graph()) {
        const MetricFactor<T>& metric = *params.metric;
        Matrix<T> d_a_star = std::move(d_acc);
        if (need_input_grad) {
            d_graph_input = Matrix<T>(n, cfg.in_dim);
        }
        if (glr_active) {
            // d glr / d a_ij = s_ij / 2 for each ordered entry
            linalg::accumulate(d_a_star, c.glr_squared, glr_weight / T(2));
            if (need_input_grad && cfg.glr_signal == GlrSignal::input) {
                linalg::accumulate(d_graph_input,
                                   graph::glr_signal_gradient(kernel, c.graph_input),
                                   glr_weight);
            }
        }
        g.d_r = Matrix<T>(metric.feature_dim(), metric.rank());
        graph::kernel_backward(c.graph_input, metric, c.projected, c.a_star, d_a_star, g.d_r,
                               need_input_grad ? &d_graph_input : nullptr);
        if (need_input_grad && cfg.graph_from == GraphFrom::post_dropout) {
            linalg::accumulate(d_prop_input, d_graph_input);
            d_graph_input = Matrix<T>();
        }
    }

    if (!need_input_grad) {
        return g;
    }
    g.d_features_in = c.dropout_mask.empty() ? std::move(d_prop_input)
                                             : linalg::hadamard(d_prop_input, c.dropout_mask);
    if (!d_graph_input.empty()) {
        linalg::accumulate(g.d_features_in, d_graph_input);
    }
    return g;
}

#define JLGCN_INSTANTIATE_LAYER(T)                                                           \
    template LayerOutput<T> forward<T>(const LayerParams<T>&, const Matrix<T>&,             \
                                       const Matrix<T>&, bool, Rng*, LayerCache<T>*);        \
    template LayerGradients<T> backward<T>(const LayerParams<T>&, const LayerCache<T>&,     \
                                           const Matrix<T>&, const Matrix<T>&, T, bool);

JLGCN_INSTANTIATE_LAYER(float)
JLGCN_INSTANTIATE_LAYER(double)

#undef JLGCN_INSTANTIATE_LAYER

} // namespace layer

template struct LayerParams<float>;
template struct LayerParams<double>;

} // namespace jlgcn
