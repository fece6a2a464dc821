#include "jlgcn/model.hpp"

#include "jlgcn/errors.hpp"
#include "jlgcn/graph.hpp"
#include "jlgcn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace jlgcn {

std::size_t LayerOptions::rank_for(std::size_t in_dim) const noexcept {
    if (r_init == MetricInit::identity) {
        return in_dim;
    }
    return std::min(rank, in_dim);
}

namespace {

void validate_common(const LayerOptions& layer, double slope) {
    if (layer.mode != LayerMode::plain_gcn && layer.rank == 0) {
        throw ConfigError("network: metric rank must be positive");
    }
    if (!(layer.r_std > 0.0)) {
        throw ConfigError("network: r_std must be positive");
    }
    if (!(slope > 0.0 && slope < 1.0)) {
        throw ConfigError("network: leaky slope must lie in (0, 1)");
    }
}

void validate_probability(double p, const char* what) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError(std::string("network: ") + what + " must lie in [0, 1)");
    }
}

LayerConfig make_layer(const LayerOptions& opt, std::size_t in, std::size_t out, double dropout) {
    LayerConfig c;
    c.mode = opt.mode;
    c.in_dim = in;
    c.out_dim = out;
    c.rank = opt.rank_for(in);
    c.input_dropout = dropout;
    c.graph_from = opt.graph_from;
    c.glr_signal = opt.glr_signal;
    c.accumulation = opt.accumulation;
    c.bias = opt.bias;
    return c;
}

template <std::floating_point T>
void append_layer_params(std::vector<ParamRef<T>>& out, LayerParams<T>& p, std::size_t l,
                         bool decay_metric) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    out.push_back({prefix + "w", &p.w, true});
    if (p.metric) {
        out.push_back({prefix + "r", &p.metric->factor(), decay_metric});
    }
    if (!p.bias.empty()) {
        out.push_back({prefix + "bias", &p.bias, false});
    }
}

template <std::floating_point T>
void append_layer_grads(std::vector<Matrix<T>>& out, LayerGradients<T>&& g,
                        const LayerParams<T>& p) {
    out.push_back(std::move(g.d_w));
    if (p.metric) {
        out.push_back(std::move(g.d_r));
    }
    if (!p.bias.empty()) {
        out.push_back(std::move(g.d_bias));
    }
}

template <std::floating_point T>
void add_row(Matrix<T>& m, const Matrix<T>& row) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t c = 0; c < r.size(); ++c) {
            r[c] += row(0, c);
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

template <std::floating_point T>
void write_rows(Matrix<T>& dst, std::size_t at, const Matrix<T>& src) {
    std::copy(src.values().begin(), src.values().end(),
              dst.values().begin() + static_cast<std::ptrdiff_t>(at * dst.cols()));
}

} // namespace

void NodeNetConfig::validate() const {
    if (widths.size() < 2) {
        throw ConfigError("node network: need at least an input and an output width");
    }
    for (std::size_t w : widths) {
        if (w == 0) {
            throw ConfigError("node network: widths must be positive");
        }
    }
    validate_common(layer, leaky_slope);
    validate_probability(dropout, "dropout");
}

void GraphNetConfig::validate() const {
    if (in_dim == 0 || classes == 0 || widths.empty()) {
        throw ConfigError("graph network: in_dim, classes and widths must be non-empty");
    }
    for (std::size_t w : widths) {
        if (w == 0) {
            throw ConfigError("graph network: widths must be positive");
        }
    }
    for (std::size_t w : head) {
        if (w == 0) {
            throw ConfigError("graph network: head widths must be positive");
        }
    }
    validate_common(layer, leaky_slope);
    validate_probability(head_dropout, "head dropout");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0) || !(bn_eps > 0.0)) {
        throw ConfigError("graph network: invalid batch-norm momentum or eps");
    }
}

// ---------------------------------------------------------------------------
// NodeClassifierNet

template <std::floating_point T>
NodeClassifierNet<T>::NodeClassifierNet(const NodeNetConfig& config, Rng& rng)
    : config_(config) {
    config_.validate();
    const std::size_t count = config_.widths.size() - 1;
    for (std::size_t l = 0; l < count; ++l) {
        const bool last = l + 1 == count;
        const double p = (last || config_.dropout_all_layers) ? config_.dropout : 0.0;
        const LayerConfig lc =
            make_layer(config_.layer, config_.widths[l], config_.widths[l + 1], p);
        layers_.push_back(
            {LayerParams<T>::init(lc, rng, config_.layer.r_init, config_.layer.r_std), {}});
    }
}

template <std::floating_point T>
NetOutput<T> NodeClassifierNet<T>::forward(const Matrix<T>& features, const Matrix<T>& graph,
                                           bool training, Rng* rng) {
    const T slope = static_cast<T>(config_.leaky_slope);
    cached_ = false;
    pre_activation_.clear();
    NetOutput<T> out;
    Matrix<T> h;
    Matrix<T> g;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        LayerOutput<T> o =
            layers_[l].forward(l == 0 ? features : h, l == 0 ? graph : g, training, rng);
        out.glr_total += o.glr_term;
        g = std::move(o.graph);
        if (l + 1 < layers_.size()) {
            h = linalg::leaky_relu(o.features, slope);
            if (training) {
                pre_activation_.push_back(std::move(o.features));
            }
        } else {
            out.logits = std::move(o.features);
        }
    }
    cached_ = training;
    return out;
}

template <std::floating_point T>
std::vector<Matrix<T>> NodeClassifierNet<T>::backward(const Matrix<T>& d_logits, T glr_weight) {
    if (!cached_) {
        throw MissingCacheError("node network backward: no training-mode forward");
    }
    const T slope = static_cast<T>(config_.leaky_slope);
    std::vector<LayerGradients<T>> per_layer(layers_.size());
    Matrix<T> upstream = d_logits;
    Matrix<T> upstream_graph;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        per_layer[l] = layers_[l].backward(upstream, glr_weight, upstream_graph, l > 0);
        upstream_graph = std::move(per_layer[l].d_graph_in);
        if (l > 0) {
            upstream = linalg::leaky_relu_backward(per_layer[l].d_features_in,
                                                   pre_activation_[l - 1], slope);
        }
    }
    std::vector<Matrix<T>> grads;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        append_layer_grads(grads, std::move(per_layer[l]), layers_[l].params);
    }
    return grads;
}

template <std::floating_point T>
std::vector<ParamRef<T>> NodeClassifierNet<T>::parameters() {
    std::vector<ParamRef<T>> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        append_layer_params(out, layers_[l].params, l, config_.layer.decay_metric);
    }
    return out;
}

template <std::floating_point T>
std::vector<Matrix<T>> NodeClassifierNet<T>::learned_adjacencies(const Matrix<T>& features,
                                                                 const Matrix<T>& graph) const {
    const T slope = static_cast<T>(config_.leaky_slope);
    std::vector<Matrix<T>> out;
    Matrix<T> h = features;
    Matrix<T> g = graph;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerParams<T>& p = layers_[l].params;
        if (p.metric) {
            out.push_back(graph::kernel_from_squared(
                              graph::pairwise_squared_distances(graph::project(h, *p.metric)))
                              .adjacency);
        } else {
            out.emplace_back();
        }
        LayerOutput<T> o = layer::forward<T>(p, h, g, false, nullptr, nullptr);
        g = std::move(o.graph);
        h = linalg::leaky_relu(o.features, slope);
    }
    return out;
}

// ---------------------------------------------------------------------------
// GraphClassifierNet

template <std::floating_point T>
GraphClassifierNet<T>::GraphClassifierNet(const GraphNetConfig& config, Rng& rng)
    : config_(config) {
    config_.validate();
    std::size_t in = config_.in_dim;
    for (std::size_t width : config_.widths) {
        const LayerConfig lc = make_layer(config_.layer, in, width, 0.0);
        layers_.push_back(
            LayerParams<T>::init(lc, rng, config_.layer.r_init, config_.layer.r_std));
        BatchNormParams<T> bn;
        bn.gamma = Matrix<T>(1, width, T(1));
        bn.beta = Matrix<T>(1, width);
        bn.running_mean = Matrix<T>(1, width);
        bn.running_var = Matrix<T>(1, width, T(1));
        bn_.push_back(std::move(bn));
        in = width;
    }
    std::vector<std::size_t> dims = config_.head;
    dims.push_back(config_.classes);
    for (std::size_t out : dims) {
        head_.push_back({linalg::glorot_init<T>(in, out, rng), Matrix<T>(1, out)});
        in = out;
    }
}

template <std::floating_point T>
NetOutput<T> GraphClassifierNet<T>::forward(std::span<const Matrix<T>> batch, bool training,
                                            Rng* rng) {
    if (batch.empty()) {
        throw EmptyInputError("graph network: empty batch");
    }
    if (training && config_.head_dropout > 0.0 && rng == nullptr) {
        throw ConfigError("graph network: training with dropout needs an Rng");
    }
    cached_ = false;
    const std::size_t b_count = batch.size();
    offsets_.assign(b_count + 1, 0);
    for (std::size_t b = 0; b < b_count; ++b) {
        if (batch[b].rows() == 0) {
            throw EmptyInputError("graph network: instance " + std::to_string(b) +
                                  " has no points");
        }
        if (batch[b].cols() != config_.in_dim) {
            throw DimensionError("graph network: instance " + std::to_string(b) + " is " +
                                 shape_string(batch[b]) + ", expected width " +
                                 std::to_string(config_.in_dim));
        }
        offsets_[b + 1] = offsets_[b] + batch[b].rows();
    }
    const std::size_t total = offsets_.back();
    const T slope = static_cast<T>(config_.leaky_slope);
    const T inv_batch = T(1) / static_cast<T>(b_count);

    NetOutput<T> out;
    layer_cache_.assign(training ? layers_.size() : 0, LayerBatch{});
    std::vector<Matrix<T>> graphs(b_count);
    Matrix<T> act;  // stacked activations of the previous layer
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::size_t width = layers_[l].config.out_dim;
        Matrix<T> stacked(total, width);
        T glr_layer = T(0);
        if (training) {
            layer_cache_[l].instances.resize(b_count);
        }
        for (std::size_t b = 0; b < b_count; ++b) {
            const std::size_t n = batch[b].rows();
            const Matrix<T> input =
                l == 0 ? batch[b] : linalg::row_block(act, offsets_[b], offsets_[b + 1]);
            if (l == 0) {
                graphs[b] = Matrix<T>(n, n);
            }
            LayerOutput<T> o =
                layer::forward<T>(layers_[l], input, graphs[b], training, nullptr,
                                  training ? &layer_cache_[l].instances[b] : nullptr);
            glr_layer += o.glr_term;
            graphs[b] = std::move(o.graph);
            write_rows(stacked, offsets_[b], o.features);
        }
        out.glr_total += glr_layer * inv_batch;

        // batch normalization over every node of every instance
        BatchNormParams<T>& bn = bn_[l];
        std::vector<T> mean(width, T(0));
        std::vector<T> var(width, T(0));
        if (training) {
            for (std::size_t i = 0; i < total; ++i) {
                for (std::size_t c = 0; c < width; ++c) {
                    mean[c] += stacked(i, c);
                }
            }
            for (std::size_t c = 0; c < width; ++c) {
                mean[c] /= static_cast<T>(total);
            }
            for (std::size_t i = 0; i < total; ++i) {
                for (std::size_t c = 0; c < width; ++c) {
                    const T d = stacked(i, c) - mean[c];
                    var[c] += d * d;
                }
            }
            const T m = static_cast<T>(config_.bn_momentum);
            for (std::size_t c = 0; c < width; ++c) {
                const T unbiased = total > 1 ? var[c] / static_cast<T>(total - 1) : T(0);
                var[c] /= static_cast<T>(total);
                bn.running_mean(0, c) = m * bn.running_mean(0, c) + (T(1) - m) * mean[c];
                bn.running_var(0, c) = m * bn.running_var(0, c) + (T(1) - m) * unbiased;
            }
        } else {
            for (std::size_t c = 0; c < width; ++c) {
                mean[c] = bn.running_mean(0, c);
                var[c] = bn.running_var(0, c);
            }
        }
        std::vector<T> inv_std(width);
        for (std::size_t c = 0; c < width; ++c) {
            inv_std[c] = T(1) / std::sqrt(var[c] + static_cast<T>(config_.bn_eps));
        }
        Matrix<T> x_hat(total, width);
        Matrix<T> y(total, width);
        for (std::size_t i = 0; i < total; ++i) {
            for (std::size_t c = 0; c < width; ++c) {
                x_hat(i, c) = (stacked(i, c) - mean[c]) * inv_std[c];
                y(i, c) = bn.gamma(0, c) * x_hat(i, c) + bn.beta(0, c);
            }
        }
        act = linalg::leaky_relu(y, slope);
        if (training) {
            layer_cache_[l].x_hat = std::move(x_hat);
            layer_cache_[l].inv_std = std::move(inv_std);
            layer_cache_[l].bn_out = std::move(y);
        }
    }

    // graph max pooling
    const std::size_t width = act.cols();
    Matrix<T> pooled(b_count, width);
    pool_index_.assign(b_count, std::vector<std::size_t>(width, 0));
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t c = 0; c < width; ++c) {
            std::size_t best = offsets_[b];
            for (std::size_t i = offsets_[b] + 1; i < offsets_[b + 1]; ++i) {
                if (act(i, c) > act(best, c)) {
                    best = i;
                }
            }
            pooled(b, c) = act(best, c);
            pool_index_[b][c] = best;
        }
    }

    head_cache_.assign(head_.size(), HeadCache{});
    Matrix<T> h = std::move(pooled);
    for (std::size_t k = 0; k < head_.size(); ++k) {
        Matrix<T> pre = linalg::matmul(h, head_[k].w);
        add_row(pre, head_[k].b);
        HeadCache& hc = head_cache_[k];
        hc.input = std::move(h);
        if (k + 1 == head_.size()) {
            out.logits = pre;
        } else {
            h = linalg::leaky_relu(pre, slope);
            if (training && config_.head_dropout > 0.0) {
                hc.mask = linalg::dropout_mask<T>(h.rows(), h.cols(), config_.head_dropout, *rng);
                h = linalg::hadamard(h, hc.mask);
            }
        }
        hc.pre = std::move(pre);
    }
    if (!training) {
        head_cache_.clear();
        pool_index_.clear();
    }
    cached_ = training;
    return out;
}

template <std::floating_point T>
std::vector<Matrix<T>> GraphClassifierNet<T>::backward(const Matrix<T>& d_logits, T glr_weight) {
    if (!cached_) {
        throw MissingCacheError("graph network backward: no training-mode forward");
    }
    const std::size_t b_count = offsets_.size() - 1;
    if (d_logits.rows() != b_count || d_logits.cols() != config_.classes) {
        throw DimensionError("graph network backward: d_logits " + shape_string(d_logits));
    }
    const T slope = static_cast<T>(config_.leaky_slope);
    const T per_instance_glr = glr_weight / static_cast<T>(b_count);

    // head, last to first
    std::vector<DenseParams<T>> d_head(head_.size());
    Matrix<T> d = d_logits;
    for (std::size_t k = head_.size(); k-- > 0;) {
        const HeadCache& hc = head_cache_[k];
        Matrix<T> d_pre = d;
        if (k + 1 < head_.size()) {
            if (!hc.mask.empty()) {
                d_pre = linalg::hadamard(d_pre, hc.mask);
            }
            d_pre = linalg::leaky_relu_backward(d_pre, hc.pre, slope);
        }
        d_head[k].w = linalg::matmul_tn(hc.input, d_pre);
        d_head[k].b = column_sums(d_pre);
        d = linalg::matmul_nt(d_pre, head_[k].w);
    }

    // unpool
    const std::size_t total = offsets_.back();
    Matrix<T> d_act(total, d.cols());
    for (std::size_t b = 0; b < b_count; ++b) {
        for (std::size_t c = 0; c < d.cols(); ++c) {
            d_act(pool_index_[b][c], c) += d(b, c);
        }
    }

    std::vector<LayerGradients<T>> d_layers(layers_.size());
    std::vector<BatchNormParams<T>> d_bn(layers_.size());
    std::vector<Matrix<T>> upstream_graph(b_count);
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const LayerBatch& lb = layer_cache_[l];
        const std::size_t width = layers_[l].config.out_dim;
        const Matrix<T> dy = linalg::leaky_relu_backward(d_act, lb.bn_out, slope);

        Matrix<T> d_gamma(1, width);
        Matrix<T> d_beta(1, width);
        for (std::size_t i = 0; i < total; ++i) {
            for (std::size_t c = 0; c < width; ++c) {
                d_beta(0, c) += dy(i, c);
                d_gamma(0, c) += dy(i, c) * lb.x_hat(i, c);
            }
        }
        const T m = static_cast<T>(total);
        Matrix<T> dx(total, width);
        for (std::size_t i = 0; i < total; ++i) {
            for (std::size_t c = 0; c < width; ++c) {
                dx(i, c) = bn_[l].gamma(0, c) * lb.inv_std[c] / m *
                           (m * dy(i, c) - d_beta(0, c) - lb.x_hat(i, c) * d_gamma(0, c));
            }
        }
        d_bn[l].gamma = std::move(d_gamma);
        d_bn[l].beta = std::move(d_beta);

        Matrix<T> d_prev(total, layers_[l].config.in_dim);
        LayerGradients<T>& acc = d_layers[l];
        for (std::size_t b = 0; b < b_count; ++b) {
            LayerGradients<T> g = layer::backward<T>(
                layers_[l], lb.instances[b], linalg::row_block(dx, offsets_[b], offsets_[b + 1]),
                upstream_graph[b], per_instance_glr, l > 0);
            if (b == 0) {
                acc.d_w = std::move(g.d_w);
                acc.d_r = std::move(g.d_r);
                acc.d_bias = std::move(g.d_bias);
            } else {
                linalg::accumulate(acc.d_w, g.d_w);
                if (!acc.d_r.empty()) {
                    linalg::accumulate(acc.d_r, g.d_r);
                }
                if (!acc.d_bias.empty()) {
                    linalg::accumulate(acc.d_bias, g.d_bias);
                }
            }
            upstream_graph[b] = std::move(g.d_graph_in);
            if (l > 0) {
                write_rows(d_prev, offsets_[b], g.d_features_in);
            }
        }
        d_act = std::move(d_prev);
    }

    std::vector<Matrix<T>> grads;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        append_layer_grads(grads, std::move(d_layers[l]), layers_[l]);
        grads.push_back(std::move(d_bn[l].gamma));
        grads.push_back(std::move(d_bn[l].beta));
    }
    for (auto& h : d_head) {
        grads.push_back(std::move(h.w));
        grads.push_back(std::move(h.b));
    }
    return grads;
}

template <std::floating_point T>
std::vector<ParamRef<T>> GraphClassifierNet<T>::parameters() {
    std::vector<ParamRef<T>> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        append_layer_params(out, layers_[l], l, config_.layer.decay_metric);
        const std::string prefix = "bn" + std::to_string(l) + ".";
        out.push_back({prefix + "gamma", &bn_[l].gamma, false});
        out.push_back({prefix + "beta", &bn_[l].beta, false});
    }
    for (std::size_t k = 0; k < head_.size(); ++k) {
        const std::string prefix = "head" + std::to_string(k) + ".";
        out.push_back({prefix + "w", &head_[k].w, true});
        out.push_back({prefix + "b", &head_[k].b, false});
    }
    return out;
}

template <std::floating_point T>
std::vector<ParamRef<T>> GraphClassifierNet<T>::buffers() {
    std::vector<ParamRef<T>> out;
    for (std::size_t l = 0; l < bn_.size(); ++l) {
        const std::string prefix = "bn" + std::to_string(l) + ".";
        out.push_back({prefix + "running_mean", &bn_[l].running_mean, false});
        out.push_back({prefix + "running_var", &bn_[l].running_var, false});
    }
    return out;
}

template class NodeClassifierNet<float>;
template class NodeClassifierNet<double>;
template class GraphClassifierNet<float>;
template class GraphClassifierNet<double>;

} // namespace jlgcn
