#ifndef JLGCN_TRAINING_HPP
#define JLGCN_TRAINING_HPP

#include "jlgcn/checkpoint.hpp"
#include "jlgcn/config.hpp"
#include "jlgcn/data.hpp"
#include "jlgcn/pointsets.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace jlgcn {

using TaskData = std::variant<DatasetBundle, PointSetCollection>;

/// Loads `config.dataset` for the configured task, or generates the
/// synthetic task when it is "synth". Applies node subsampling.
TaskData load_task_data(const TrainConfig& config);

struct SeedReport {
    std::uint64_t seed = 0;
    std::size_t epochs_run = 0;
    std::size_t selected_epoch = 0;  ///< number of completed epochs at the selected state
    double final_train_acc = 0.0;
    double final_val_acc = 0.0;
    double final_test_acc = 0.0;
    double selected_test_acc = 0.0;
    std::vector<double> train_loss;  ///< joint objective per epoch
    std::vector<double> val_loss;    ///< validation cross-entropy per epoch (eval mode)
    std::vector<double> val_acc;
    double wall_seconds = 0.0;
};

/// Mean and sample standard deviation (zero for a single value).
struct Summary {
    double mean = 0.0;
    double std = 0.0;
};

Summary summarize(std::span<const double> values);

struct RunReport {
    std::string config_json;
    std::vector<SeedReport> runs;
    Summary final_train_acc;
    Summary final_val_acc;
    Summary final_test_acc;
    Summary selected_test_acc;

    /// Recomputes the summaries from `runs`.
    void aggregate();
};

/// `include_timing = false` drops wall times so two reports of the same run
/// compare equal byte for byte.
std::string to_json(const RunReport& report, bool include_timing = true);

struct TrainOptions {
    /// Called after every epoch with (seed, completed epochs, joint loss, validation accuracy).
    std::function<void(std::uint64_t, std::size_t, double, double)> progress;
};

struct TrainResult {
    RunReport report;
    Checkpoint checkpoint;  ///< selected state of the first seed
};

/// Trains one model per seed. Perturbations are drawn from
/// Rng(perturbation.seed + run seed), so every seed sees its own removal.
TrainResult train(const TrainConfig& config, const TaskData& data,
                  const TrainOptions& options = {});

struct EvalReport {
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
};

/// Evaluates a checkpoint on the data it was trained for, re-applying the
/// run's perturbation. `config` is normally parsed from the checkpoint.
EvalReport evaluate(const TrainConfig& config, const TaskData& data, const Checkpoint& checkpoint);

/// Node task: the eval-mode learned adjacency A* of `layer`, or the
/// (perturbed) ground-truth adjacency for layer -1, restricted to nodes
/// [begin, end). Throws ConfigError for a bad layer or range.
DenseMatrix export_graph(const TrainConfig& config, const DatasetBundle& data,
                         const Checkpoint& checkpoint, int layer, std::size_t begin,
                         std::size_t end);

struct AblationGrid {
    std::vector<double> lambda;
    std::vector<double> edge_missing;
    std::vector<double> label_missing;
    std::vector<double> point_missing;
};

/// One CSV row. kind is "seed" for a single run, "mean" or "std" for the
/// aggregate over the seeds of a cell (seed is then empty).
struct AblationRow {
    std::string kind;
    double lambda = 0.0;
    double edge_missing = 0.0;
    double label_missing = 0.0;
    double point_missing = 0.0;
    std::optional<std::uint64_t> seed;
    double final_train_acc = 0.0;
    double final_val_acc = 0.0;
    double final_test_acc = 0.0;
    double selected_test_acc = 0.0;
};

/// Cross product of the grids; each cell trains every configured seed.
/// Throws ConfigError when a grid is empty.
std::vector<AblationRow> ablate(const TrainConfig& config, const AblationGrid& grid,
                                const TaskData& data, const TrainOptions& options = {});

/// Header: kind,lambda,edge_missing,label_missing,point_missing,seed,
/// final_train_acc,final_val_acc,final_test_acc,selected_test_acc
/// Accuracies use 17 significant digits.
std::string ablation_csv(std::span<const AblationRow> rows);

} // namespace jlgcn

#endif // JLGCN_TRAINING_HPP
