#include "jlgcn/training.hpp"

#include "jlgcn/errors.hpp"
#include "jlgcn/loss.hpp"
#include "jlgcn/model.hpp"
#include "jlgcn/optim.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace jlgcn {

using nlohmann::json;

namespace {

std::size_t count_true(const Mask& m) {
    return static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
}

std::vector<std::size_t> indices_of(const Mask& m) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i]) {
            out.push_back(i);
        }
    }
    return out;
}

PerturbationSpec run_perturbation(const TrainConfig& config, std::uint64_t seed) {
    PerturbationSpec spec = config.perturbation;
    spec.seed = config.perturbation.seed + seed;
    return spec;
}

/// Parameter values at one point of training.
template <std::floating_point T>
struct Snapshot {
    std::vector<Matrix<T>> values;

    void take(std::span<const ParamRef<T>> params) {
        values.clear();
        for (const auto& p : params) {
            values.push_back(*p.value);
        }
    }
};

template <std::floating_point T>
std::vector<ParamRef<T>> joined(std::vector<ParamRef<T>> a, const std::vector<ParamRef<T>>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

template <std::floating_point T>
Checkpoint make_checkpoint(const TrainConfig& config, std::span<const ParamRef<T>> params,
                           const Snapshot<T>& snap, const Rng& rng) {
    Checkpoint ck;
    ck.dtype = sizeof(T);
    ck.rng_seed = rng.seed();
    ck.rng_position = rng.position();
    ck.config_json = to_json(config);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Matrix<T>& m = snap.values[k];
        ck.tensors.push_back({params[k].name, m.rows(), m.cols(),
                              std::vector<double>(m.values().begin(), m.values().end())});
    }
    return ck;
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw NumericError(std::string("training diverged: non-finite ") + what);
    }
}

/// Selection bookkeeping shared by both tasks.
struct Selector {
    Selection rule;
    std::size_t patience;
    double best_val = -1.0;
    std::size_t best_epoch = 0;

    /// True when the state after `epoch` completed epochs becomes the selection.
    bool offer(double val_acc, std::size_t epoch) {
        if (val_acc > best_val) {
            best_val = val_acc;
            best_epoch = epoch;
            return true;
        }
        return false;
    }

    bool should_stop(std::size_t epoch) const {
        return rule == Selection::best_val && patience > 0 && epoch - best_epoch >= patience;
    }
};

// ---------------------------------------------------------------- node task

DatasetBundle prepare_node_data(const TrainConfig& config, const DatasetBundle& bundle,
                                std::uint64_t seed) {
    return perturb(bundle, run_perturbation(config, seed));
}

template <std::floating_point T>
struct NodeEval {
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    double val_loss = 0.0;
};

template <std::floating_point T>
NodeEval<T> evaluate_node(NodeClassifierNet<T>& net, const Matrix<T>& x, const Matrix<T>& g,
                          const DatasetBundle& data) {
    const auto out = net.forward(x, g, false);
    const std::span<const int> labels(data.labels);
    NodeEval<T> e;
    e.train_acc = accuracy(out.logits, labels, data.train);
    e.val_acc = accuracy(out.logits, labels, data.val);
    e.test_acc = accuracy(out.logits, labels, data.test);
    e.val_loss = static_cast<double>(cross_entropy(out.logits, labels, data.val).loss);
    return e;
}

template <std::floating_point T>
Matrix<T> node_graph(const TrainConfig& config, const DatasetBundle& data) {
    if (!config.use_ground_truth_graph) {
        return Matrix<T>(data.nodes(), data.nodes());
    }
    return data.adjacency().template cast<T>();
}

template <std::floating_point T>
std::pair<SeedReport, Checkpoint> run_node_seed(const TrainConfig& config,
                                                const DatasetBundle& bundle, std::uint64_t seed,
                                                const TrainOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const DatasetBundle data = prepare_node_data(config, bundle, seed);
    if (count_true(data.train) == 0) {
        throw EmptyMaskError("no training nodes left after label removal");
    }
    if (count_true(data.val) == 0 || count_true(data.test) == 0) {
        throw DataError("dataset needs non-empty validation and test splits");
    }

    Rng rng(seed);
    Rng init = rng.split();
    NodeClassifierNet<T> net(config.node_net(data.feature_dim(), data.num_classes), init);
    const Matrix<T> x = data.features.template cast<T>();
    const Matrix<T> g = node_graph<T>(config, data);
    const std::span<const int> labels(data.labels);
    const AdamConfig adam_cfg = config.adam();
    Adam<T> opt(adam_cfg);
    const auto params = net.parameters();
    const T lambda = static_cast<T>(config.lambda);

    SeedReport rep;
    rep.seed = seed;
    Selector sel{config.selection, config.patience};
    Snapshot<T> snap;

    NodeEval<T> ev = evaluate_node(net, x, g, data);
    sel.offer(ev.val_acc, 0);
    rep.selected_test_acc = ev.test_acc;
    snap.take(params);
    Rng snap_rng = rng;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto out = net.forward(x, g, true, &rng);
        const auto ce = cross_entropy(out.logits, labels, data.train, config.reduction);
        const double loss =
            static_cast<double>(ce.loss) + config.lambda * static_cast<double>(out.glr_total);
        check_finite(loss, "loss");
        const auto grads = net.backward(ce.d_logits, lambda);
        opt.step(params, grads, scheduled_lr(adam_cfg, epoch));

        ev = evaluate_node(net, x, g, data);
        check_finite(ev.val_loss, "validation loss");
        rep.train_loss.push_back(loss);
        rep.val_loss.push_back(ev.val_loss);
        rep.val_acc.push_back(ev.val_acc);
        rep.epochs_run = epoch + 1;
        if (options.progress) {
            options.progress(seed, epoch + 1, loss, ev.val_acc);
        }
        if (sel.offer(ev.val_acc, epoch + 1)) {
            rep.selected_test_acc = ev.test_acc;
            snap.take(params);
            snap_rng = rng;
        }
        if (sel.should_stop(epoch + 1)) {
            break;
        }
    }

    rep.final_train_acc = ev.train_acc;
    rep.final_val_acc = ev.val_acc;
    rep.final_test_acc = ev.test_acc;
    rep.selected_epoch = sel.best_epoch;
    if (config.selection == Selection::final_epoch) {
        rep.selected_test_acc = ev.test_acc;
        rep.selected_epoch = rep.epochs_run;
        snap.take(params);
        snap_rng = rng;
    }
    Checkpoint ck = make_checkpoint<T>(config, params, snap, snap_rng);
    ck.rng_seed = seed;
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(rep), std::move(ck)};
}

// --------------------------------------------------------------- graph task

/// Point sets of one run: training instances after label removal and
/// evaluation instances after point removal.
template <std::floating_point T>
struct GraphRunData {
    std::vector<Matrix<T>> points;
    std::vector<int> labels;
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

template <std::floating_point T>
GraphRunData<T> prepare_graph_data(const TrainConfig& config, const PointSetCollection& coll,
                                   std::uint64_t seed) {
    const PerturbationSpec spec = run_perturbation(config, seed);
    spec.validate();
    Rng rng(spec.seed);
    GraphRunData<T> d;
    d.train = indices_of(coll.train);
    d.val = indices_of(coll.val);
    d.test = indices_of(coll.test);
    const auto drop = static_cast<std::size_t>(
        std::floor(spec.label_missing * static_cast<double>(d.train.size())));
    if (drop > 0) {
        rng.shuffle(std::span<std::size_t>(d.train));
        d.train.erase(d.train.begin(), d.train.begin() + static_cast<std::ptrdiff_t>(drop));
        std::sort(d.train.begin(), d.train.end());
    }
    for (const auto& ps : coll.instances) {
        d.points.push_back(ps.points.template cast<T>());
        d.labels.push_back(ps.label);
    }
    if (spec.point_missing > 0.0) {
        for (std::size_t i : d.test) {
            d.points[i] = drop_points(coll.instances[i].points, spec.point_missing, rng)
                              .template cast<T>();
        }
    }
    return d;
}

template <std::floating_point T>
struct GraphEval {
    double acc = 0.0;
    double loss = 0.0;
};

template <std::floating_point T>
GraphEval<T> evaluate_graph(GraphClassifierNet<T>& net, const GraphRunData<T>& d,
                            std::span<const std::size_t> ids, std::size_t batch_size) {
    GraphEval<T> e;
    if (ids.empty()) {
        return e;
    }
    std::size_t correct = 0;
    double loss = 0.0;
    for (std::size_t b = 0; b < ids.size(); b += batch_size) {
        const std::size_t n = std::min(batch_size, ids.size() - b);
        std::vector<Matrix<T>> batch;
        std::vector<int> y;
        for (std::size_t k = 0; k < n; ++k) {
            batch.push_back(d.points[ids[b + k]]);
            y.push_back(d.labels[ids[b + k]]);
        }
        const auto out = net.forward(batch, false);
        const Mask all(n, true);
        correct += static_cast<std::size_t>(
            std::lround(accuracy(out.logits, std::span<const int>(y), all) * static_cast<double>(n)));
        loss += static_cast<double>(
            cross_entropy(out.logits, std::span<const int>(y), all, Reduction::sum).loss);
    }
    e.acc = static_cast<double>(correct) / static_cast<double>(ids.size());
    e.loss = loss / static_cast<double>(ids.size());
    return e;
}

template <std::floating_point T>
std::pair<SeedReport, Checkpoint> run_graph_seed(const TrainConfig& config,
                                                 const PointSetCollection& coll,
                                                 std::uint64_t seed, const TrainOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const GraphRunData<T> d = prepare_graph_data<T>(config, coll, seed);
    if (d.train.empty()) {
        throw EmptyMaskError("no training instances left after label removal");
    }
    if (d.test.empty()) {
        throw DataError("point-set collection has no test instances");
    }
    if (d.val.empty() && config.selection == Selection::best_val) {
        throw ConfigError("best_val selection needs validation instances; use selection=final");
    }

    Rng rng(seed);
    Rng init = rng.split();
    GraphClassifierNet<T> net(config.graph_net(coll.num_classes()), init);
    const AdamConfig adam_cfg = config.adam();
    Adam<T> opt(adam_cfg);
    const auto params = net.parameters();
    const auto state = joined(net.parameters(), net.buffers());
    const T lambda = static_cast<T>(config.lambda);
    const std::size_t bs = config.batch_size;

    SeedReport rep;
    rep.seed = seed;
    Selector sel{config.selection, config.patience};
    Snapshot<T> snap;
    snap.take(state);
    Rng snap_rng = rng;
    if (!d.val.empty()) {
        sel.offer(evaluate_graph(net, d, d.val, bs).acc, 0);
    }
    rep.selected_test_acc = evaluate_graph(net, d, d.test, bs).acc;
    double last_val = sel.best_val;

    std::vector<std::size_t> order = d.train;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        const double lr = scheduled_lr(adam_cfg, epoch);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += bs) {
            const std::size_t n = std::min(bs, order.size() - b);
            std::vector<Matrix<T>> batch;
            std::vector<int> y;
            for (std::size_t k = 0; k < n; ++k) {
                batch.push_back(d.points[order[b + k]]);
                y.push_back(d.labels[order[b + k]]);
            }
            const auto out = net.forward(batch, true, &rng);
            const auto ce =
                cross_entropy(out.logits, std::span<const int>(y), Mask(n, true), config.reduction);
            const double loss =
                static_cast<double>(ce.loss) + config.lambda * static_cast<double>(out.glr_total);
            check_finite(loss, "loss");
            epoch_loss += loss * static_cast<double>(n);
            const auto grads = net.backward(ce.d_logits, lambda);
            opt.step(params, grads, lr);
        }
        epoch_loss /= static_cast<double>(order.size());
        rep.train_loss.push_back(epoch_loss);
        rep.epochs_run = epoch + 1;

        if (!d.val.empty()) {
            const auto ev = evaluate_graph(net, d, d.val, bs);
            last_val = ev.acc;
            rep.val_loss.push_back(ev.loss);
            rep.val_acc.push_back(ev.acc);
            if (config.selection == Selection::best_val && sel.offer(ev.acc, epoch + 1)) {
                rep.selected_test_acc = evaluate_graph(net, d, d.test, bs).acc;
                snap.take(state);
                snap_rng = rng;
            }
        }
        if (options.progress) {
            options.progress(seed, epoch + 1, epoch_loss, last_val);
        }
        if (sel.should_stop(epoch + 1)) {
            break;
        }
    }

    rep.final_train_acc = evaluate_graph(net, d, d.train, bs).acc;
    rep.final_val_acc = d.val.empty() ? 0.0 : last_val;
    rep.final_test_acc = evaluate_graph(net, d, d.test, bs).acc;
    rep.selected_epoch = sel.best_epoch;
    if (config.selection == Selection::final_epoch) {
        rep.selected_test_acc = rep.final_test_acc;
        rep.selected_epoch = rep.epochs_run;
        snap.take(state);
        snap_rng = rng;
    }
    Checkpoint ck = make_checkpoint<T>(config, state, snap, snap_rng);
    ck.rng_seed = seed;
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(rep), std::move(ck)};
}

template <std::floating_point T>
TrainResult train_typed(const TrainConfig& config, const TaskData& data,
                        const TrainOptions& options) {
    TrainResult result;
    result.report.config_json = to_json(config);
    for (std::size_t k = 0; k < config.seeds.size(); ++k) {
        std::pair<SeedReport, Checkpoint> run;
        if (config.task == Task::node) {
            run = run_node_seed<T>(config, std::get<DatasetBundle>(data), config.seeds[k], options);
        } else {
            run = run_graph_seed<T>(config, std::get<PointSetCollection>(data), config.seeds[k],
                                    options);
        }
        result.report.runs.push_back(std::move(run.first));
        if (k == 0) {
            result.checkpoint = std::move(run.second);
        }
    }
    result.report.aggregate();
    return result;
}

void check_task_data(const TrainConfig& config, const TaskData& data) {
    const bool node = std::holds_alternative<DatasetBundle>(data);
    if (node != (config.task == Task::node)) {
        throw ConfigError("task '" + std::string(to_string(config.task)) +
                          "' does not match the loaded data");
    }
    if (node) {
        config.validate_for(std::get<DatasetBundle>(data).feature_dim());
    } else {
        config.validate_for(3);
    }
}

template <std::floating_point T>
EvalReport evaluate_typed(const TrainConfig& config, const TaskData& data, const Checkpoint& ck) {
    EvalReport r;
    Rng init(0);
    if (config.task == Task::node) {
        const DatasetBundle d = prepare_node_data(config, std::get<DatasetBundle>(data), ck.rng_seed);
        NodeClassifierNet<T> net(config.node_net(d.feature_dim(), d.num_classes), init);
        restore<T>(ck, net.parameters());
        const auto ev = evaluate_node(net, d.features.template cast<T>(), node_graph<T>(config, d), d);
        r.train_acc = ev.train_acc;
        r.val_acc = ev.val_acc;
        r.test_acc = ev.test_acc;
        return r;
    }
    const auto& coll = std::get<PointSetCollection>(data);
    const GraphRunData<T> d = prepare_graph_data<T>(config, coll, ck.rng_seed);
    GraphClassifierNet<T> net(config.graph_net(coll.num_classes()), init);
    restore<T>(ck, joined(net.parameters(), net.buffers()));
    r.train_acc = evaluate_graph(net, d, d.train, config.batch_size).acc;
    r.val_acc = evaluate_graph(net, d, d.val, config.batch_size).acc;
    r.test_acc = evaluate_graph(net, d, d.test, config.batch_size).acc;
    return r;
}

template <std::floating_point T>
DenseMatrix export_typed(const TrainConfig& config, const DatasetBundle& bundle,
                         const Checkpoint& ck, int layer, std::size_t begin, std::size_t end) {
    const DatasetBundle d = prepare_node_data(config, bundle, ck.rng_seed);
    if (begin >= end || end > d.nodes()) {
        throw ConfigError("node range [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") is invalid for " + std::to_string(d.nodes()) + " nodes");
    }
    DenseMatrix full;
    if (layer == -1) {
        full = d.adjacency();
    } else {
        Rng init(0);
        NodeClassifierNet<T> net(config.node_net(d.feature_dim(), d.num_classes), init);
        restore<T>(ck, net.parameters());
        const auto graphs =
            net.learned_adjacencies(d.features.template cast<T>(), node_graph<T>(config, d));
        if (layer < 0 || static_cast<std::size_t>(layer) >= graphs.size()) {
            throw ConfigError("layer index " + std::to_string(layer) + " out of range; the model has " +
                              std::to_string(graphs.size()) +
                              " learned graphs (use -1 for the ground truth)");
        }
        full = graphs[static_cast<std::size_t>(layer)].template cast<double>();
    }
    const std::size_t n = end - begin;
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = full(begin + i, begin + j);
        }
    }
    return out;
}

json summary_json(const Summary& s) { return json{{"mean", s.mean}, {"std", s.std}}; }

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

TaskData load_task_data(const TrainConfig& config) {
    config.validate();
    if (config.dataset.empty()) {
        throw ConfigError("no dataset given (pass a dataset directory or \"synth\")");
    }
    if (config.task == Task::node) {
        DatasetBundle bundle = config.dataset == "synth" ? synth_citation(config.synth_citation)
                                                         : load_citation(config.dataset);
        if (config.subsample > 0 && config.subsample < bundle.nodes()) {
            Rng rng(config.perturbation.seed);
            bundle = subsample_nodes(bundle, config.subsample, rng);
        }
        return bundle;
    }
    if (config.dataset == "synth") {
        const auto& s = config.synth_points;
        Rng rng(s.seed);
        PointSetCollection coll = synth_pointsets(s.families, s.per_class, s.points, s.noise, rng);
        split_pointsets(coll, s.test_fraction, s.val_fraction, rng);
        return coll;
    }
    return load_pointsets(config.dataset);
}

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) {
        return s;
    }
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - s.mean) * (v - s.mean);
        }
        s.std = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

void RunReport::aggregate() {
    auto column = [&](double SeedReport::*field) {
        std::vector<double> v;
        for (const auto& r : runs) {
            v.push_back(r.*field);
        }
        return summarize(v);
    };
    final_train_acc = column(&SeedReport::final_train_acc);
    final_val_acc = column(&SeedReport::final_val_acc);
    final_test_acc = column(&SeedReport::final_test_acc);
    selected_test_acc = column(&SeedReport::selected_test_acc);
}

std::string to_json(const RunReport& report, bool include_timing) {
    json runs = json::array();
    for (const auto& r : report.runs) {
        json j{
            {"seed", r.seed},
            {"epochs_run", r.epochs_run},
            {"selected_epoch", r.selected_epoch},
            {"final_train_acc", r.final_train_acc},
            {"final_val_acc", r.final_val_acc},
            {"final_test_acc", r.final_test_acc},
            {"selected_test_acc", r.selected_test_acc},
            {"train_loss", r.train_loss},
            {"val_loss", r.val_loss},
            {"val_acc", r.val_acc},
        };
        if (include_timing) {
            j["wall_seconds"] = r.wall_seconds;
        }
        runs.push_back(std::move(j));
    }
    json config = json::parse(report.config_json.empty() ? "{}" : report.config_json);
    const json doc{
        {"config", config},
        {"runs", runs},
        {"summary",
         {{"final_train_acc", summary_json(report.final_train_acc)},
          {"final_val_acc", summary_json(report.final_val_acc)},
          {"final_test_acc", summary_json(report.final_test_acc)},
          {"selected_test_acc", summary_json(report.selected_test_acc)}}},
    };
    return doc.dump(2);
}

TrainResult train(const TrainConfig& config, const TaskData& data, const TrainOptions& options) {
    check_task_data(config, data);
    if (config.precision == Precision::f32) {
        return train_typed<float>(config, data, options);
    }
    return train_typed<double>(config, data, options);
}

EvalReport evaluate(const TrainConfig& config, const TaskData& data, const Checkpoint& ck) {
    check_task_data(config, data);
    if (ck.dtype != (config.precision == Precision::f32 ? 4u : 8u)) {
        throw CheckpointError("checkpoint element size " + std::to_string(ck.dtype) +
                              " does not match precision " +
                              std::string(to_string(config.precision)));
    }
    if (config.precision == Precision::f32) {
        return evaluate_typed<float>(config, data, ck);
    }
    return evaluate_typed<double>(config, data, ck);
}

DenseMatrix export_graph(const TrainConfig& config, const DatasetBundle& data,
                         const Checkpoint& ck, int layer, std::size_t begin, std::size_t end) {
    if (config.task != Task::node) {
        throw ConfigError("export-graph supports the node task only");
    }
    config.validate_for(data.feature_dim());
    if (config.precision == Precision::f32) {
        return export_typed<float>(config, data, ck, layer, begin, end);
    }
    return export_typed<double>(config, data, ck, layer, begin, end);
}

std::vector<AblationRow> ablate(const TrainConfig& config, const AblationGrid& grid,
                                const TaskData& data, const TrainOptions& options) {
    if (grid.lambda.empty() || grid.edge_missing.empty() || grid.label_missing.empty() ||
        grid.point_missing.empty()) {
        throw ConfigError("every ablation grid needs at least one value");
    }
    std::vector<AblationRow> rows;
    for (double lambda : grid.lambda) {
        for (double edge : grid.edge_missing) {
            for (double label : grid.label_missing) {
                for (double point : grid.point_missing) {
                    TrainConfig cell = config;
                    cell.lambda = lambda;
                    cell.perturbation.edge_missing = edge;
                    cell.perturbation.label_missing = label;
                    cell.perturbation.point_missing = point;
                    const RunReport report = train(cell, data, options).report;
                    AblationRow base;
                    base.lambda = lambda;
                    base.edge_missing = edge;
                    base.label_missing = label;
                    base.point_missing = point;
                    for (const auto& r : report.runs) {
                        AblationRow row = base;
                        row.kind = "seed";
                        row.seed = r.seed;
                        row.final_train_acc = r.final_train_acc;
                        row.final_val_acc = r.final_val_acc;
                        row.final_test_acc = r.final_test_acc;
                        row.selected_test_acc = r.selected_test_acc;
                        rows.push_back(row);
                    }
                    AblationRow mean = base;
                    mean.kind = "mean";
                    mean.final_train_acc = report.final_train_acc.mean;
                    mean.final_val_acc = report.final_val_acc.mean;
                    mean.final_test_acc = report.final_test_acc.mean;
                    mean.selected_test_acc = report.selected_test_acc.mean;
                    AblationRow sd = base;
                    sd.kind = "std";
                    sd.final_train_acc = report.final_train_acc.std;
                    sd.final_val_acc = report.final_val_acc.std;
                    sd.final_test_acc = report.final_test_acc.std;
                    sd.selected_test_acc = report.selected_test_acc.std;
                    rows.push_back(mean);
                    rows.push_back(sd);
                }
            }
        }
    }
    return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
    std::ostringstream out;
    out << "kind,lambda,edge_missing,label_missing,point_missing,seed,"
           "final_train_acc,final_val_acc,final_test_acc,selected_test_acc\n";
    for (const auto& r : rows) {
        out << r.kind << ',' << format_real(r.lambda) << ',' << format_real(r.edge_missing) << ','
            << format_real(r.label_missing) << ',' << format_real(r.point_missing) << ',';
        if (r.seed) {
            out << *r.seed;
        }
        out << ',' << format_real(r.final_train_acc) << ',' << format_real(r.final_val_acc) << ','
            << format_real(r.final_test_acc) << ',' << format_real(r.selected_test_acc) << '\n';
    }
    return out.str();
}

} // namespace jlgcn
