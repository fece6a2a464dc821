#ifndef JLGCN_CONFIG_HPP
#define JLGCN_CONFIG_HPP

#include "jlgcn/data.hpp"
#include "jlgcn/layer.hpp"
#include "jlgcn/loss.hpp"
#include "jlgcn/model.hpp"
#include "jlgcn/optim.hpp"
#include "jlgcn/pointsets.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace jlgcn {

enum class Task { node, graph };
enum class Selection { best_val, final_epoch };
enum class Precision { f32, f64 };

std::string_view to_string(Task t);
std::string_view to_string(Selection s);
std::string_view to_string(Precision p);
Task parse_task(std::string_view s);
Selection parse_selection(std::string_view s);
Precision parse_precision(std::string_view s);

/// Synthetic point-set task used when a graph-task config names no dataset.
struct SynthPointsConfig {
    std::vector<ShapeFamily> families = all_shape_families();
    std::size_t per_class = 200;
    std::size_t points = 128;
    double noise = 0.02;
    double test_fraction = 0.25;
    double val_fraction = 0.125;
    std::uint64_t seed = 0;
};

/// Every hyperparameter of a training run.
///
/// `dataset` names a citation directory (node task) or a point-set directory
/// (graph task). The value "synth" selects the task's synthetic generator.
struct TrainConfig {
    Task task = Task::node;
    std::string dataset = "synth";

    std::vector<std::size_t> hidden{16};       ///< graph layer widths before the output
    std::vector<std::size_t> head{512, 256};   ///< graph task: fully connected widths

    LayerMode mode = LayerMode::jlgcn;
    std::size_t rank = 16;
    MetricInit r_init = MetricInit::random;
    double r_std = 3.0;  ///< spread of a random R; see README "Metric initialization"
    GlrSignal glr_signal = GlrSignal::input;
    GraphFrom graph_from = GraphFrom::pre_dropout;
    GraphAccumulation accumulation = GraphAccumulation::raw;
    bool bias = false;
    bool decay_metric = true;

    double lambda = 1e-4;
    double lr = 0.1;
    double weight_decay = 5e-4;
    double decay_factor = 0.5;
    std::size_t decay_period = 100;
    std::size_t epochs = 500;
    std::size_t batch_size = 32;
    double dropout = 0.5;
    bool dropout_all_layers = false;
    double leaky_slope = 0.2;
    double bn_momentum = 0.9;
    Reduction reduction = Reduction::mean;
    Selection selection = Selection::best_val;
    std::size_t patience = 0;  ///< epochs without validation gain before stopping; 0 never stops

    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    PerturbationSpec perturbation;
    bool use_ground_truth_graph = true;
    std::size_t subsample = 0;  ///< node budget; 0 keeps every node
    Precision precision = Precision::f64;

    SynthCitationConfig synth_citation;
    SynthPointsConfig synth_points;

    /// Range checks that do not depend on the data.
    void validate() const;
    /// Checks against the loaded data: identity r_init needs rank == feature_dim.
    void validate_for(std::size_t feature_dim) const;

    AdamConfig adam() const;
    LayerOptions layer_options() const;
    NodeNetConfig node_net(std::size_t feature_dim, std::size_t classes) const;
    GraphNetConfig graph_net(std::size_t classes) const;
};

/// Shipped profiles: "cora", "citeseer", "pubmed" (node task) and
/// "pointset" (graph task). Throws ConfigError for other names.
TrainConfig profile(std::string_view name);
std::vector<std::string> profile_names();

/// JSON with snake_case keys; every field is written.
std::string to_json(const TrainConfig& config);

/// Applies the keys of a JSON object on top of `base`. Unknown keys and
/// ill-typed values raise ConfigError. A "profile" key selects the base
/// profile before the other keys are applied.
TrainConfig parse_config(std::string_view json_text, const TrainConfig& base = {});
TrainConfig load_config(const std::filesystem::path& path);

/// Sets one field from text, e.g. ("edge-missing", "0.5") or ("hidden", "[32,16]").
/// Keys may use dashes or underscores; nested fields use dots
/// ("synth-points.noise"). Perturbation ratios are also reachable at the
/// top level: edge-missing, label-missing, point-missing.
void apply_override(TrainConfig& config, std::string_view key, std::string_view value);

/// Top-level keys accepted by apply_override, in kebab-case.
std::vector<std::string> override_keys();

} // namespace jlgcn

#endif // JLGCN_CONFIG_HPP
