// jlgcn: train, evaluate, sweep and inspect JLGCN models.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error,
// 3 data error (including checkpoints), 4 numeric error.

#include "jlgcn/checkpoint.hpp"
#include "jlgcn/config.hpp"
#include "jlgcn/data.hpp"
#include "jlgcn/errors.hpp"
#include "jlgcn/export.hpp"
#include "jlgcn/pointsets.hpp"
#include "jlgcn/training.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

/// Config sources shared by train and ablate: profile, file, per-field flags, --set.
struct ConfigArgs {
    std::string profile;
    std::string file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> fields;

    void attach(CLI::App& cmd) {
        cmd.add_option("--profile", profile, "Start from a shipped profile")
            ->check(CLI::IsMember(jlgcn::profile_names()));
        cmd.add_option("-c,--config", file, "JSON config file (applied after --profile)")
            ->check(CLI::ExistingFile);
        for (const auto& key : jlgcn::override_keys()) {
            cmd.add_option("--" + key, fields[key], "Config field " + key)->group("Config fields");
        }
        cmd.add_option("--set", sets, "Override any field: key=value (nested: a.b=value)");
    }

    jlgcn::TrainConfig build() const {
        jlgcn::TrainConfig cfg = profile.empty() ? jlgcn::TrainConfig{} : jlgcn::profile(profile);
        if (!file.empty()) {
            std::ifstream in(file);
            std::ostringstream text;
            text << in.rdbuf();
            cfg = jlgcn::parse_config(text.str(), cfg);
        }
        for (const auto& [key, value] : fields) {
            if (!value.empty()) {
                jlgcn::apply_override(cfg, key, value);
            }
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw jlgcn::ConfigError("--set expects key=value, got '" + s + "'");
            }
            jlgcn::apply_override(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') {
            std::cout << '\n';
        }
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw jlgcn::DataError("cannot write " + path);
    }
    out << text << '\n';
}

std::vector<double> parse_grid(const std::string& text, const char* name) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string cell = text.substr(pos, comma - pos);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || ec != std::errc{} || end != cell.data() + cell.size()) {
            throw jlgcn::ConfigError(std::string(name) + ": '" + cell + "' is not a number");
        }
        out.push_back(v);
        pos = comma + 1;
    }
    return out;
}

jlgcn::TrainOptions progress_options(bool verbose) {
    jlgcn::TrainOptions opts;
    if (verbose) {
        opts.progress = [](std::uint64_t seed, std::size_t epoch, double loss, double val) {
            std::fprintf(stderr, "seed %llu epoch %zu loss %.6f val_acc %.4f\n",
                         static_cast<unsigned long long>(seed), epoch, loss, val);
        };
    }
    return opts;
}

void print_summary(const jlgcn::RunReport& report) {
    std::fprintf(stderr, "selected test accuracy %.4f +/- %.4f over %zu seed(s); final test %.4f\n",
                 report.selected_test_acc.mean, report.selected_test_acc.std, report.runs.size(),
                 report.final_test_acc.mean);
}

int run(int argc, char** argv) {
    CLI::App app{"Joint learning of graph structure and node features (JLGCN)"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train one model per seed and write a JSON report");
    ConfigArgs train_cfg;
    train_cfg.attach(*train);
    std::string train_report;
    std::string train_ckpt;
    bool train_verbose = false;
    bool train_no_timing = false;
    train->add_option("--report", train_report, "Report path (default: stdout)");
    train->add_option("--checkpoint", train_ckpt, "Checkpoint of the first seed's selected state");
    train->add_flag("-v,--verbose", train_verbose, "Print per-epoch progress to stderr");
    train->add_flag("--no-timing", train_no_timing, "Omit wall times from the report");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on its dataset");
    std::string eval_ckpt;
    std::string eval_dataset;
    std::string eval_report;
    eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
    eval->add_option("--dataset", eval_dataset, "Override the dataset recorded in the checkpoint");
    eval->add_option("--report", eval_report, "Report path (default: stdout)");

    // ablate
    auto* abl = app.add_subcommand("ablate", "Grid sweep over lambda and missing ratios (CSV)");
    ConfigArgs abl_cfg;
    abl_cfg.attach(*abl);
    std::string grid_lambda;
    std::string grid_edge;
    std::string grid_label;
    std::string grid_point;
    std::string abl_out;
    bool abl_verbose = false;
    abl->add_option("--lambda-grid", grid_lambda, "Comma-separated lambda values");
    abl->add_option("--edge-missing-grid", grid_edge, "Comma-separated edge missing ratios");
    abl->add_option("--label-missing-grid", grid_label, "Comma-separated label missing ratios");
    abl->add_option("--point-missing-grid", grid_point, "Comma-separated point missing ratios");
    abl->add_option("-o,--out", abl_out, "CSV path (default: stdout)");
    abl->add_flag("-v,--verbose", abl_verbose, "Print per-epoch progress to stderr");

    // export-graph
    auto* exp = app.add_subcommand("export-graph", "Write a learned graph as CSV and PGM heatmap");
    std::string exp_ckpt;
    std::string exp_dataset;
    std::string exp_prefix;
    int exp_layer = 0;
    std::size_t exp_begin = 0;
    std::size_t exp_end = 50;
    double exp_scale = 10.0;
    exp->add_option("--checkpoint", exp_ckpt)->required()->check(CLI::ExistingFile);
    exp->add_option("--dataset", exp_dataset, "Override the dataset recorded in the checkpoint");
    exp->add_option("--layer", exp_layer, "Layer index; -1 exports the ground-truth graph")
        ->capture_default_str();
    exp->add_option("--begin", exp_begin, "First node")->capture_default_str();
    exp->add_option("--end", exp_end, "One past the last node")->capture_default_str();
    exp->add_option("--log-scale", exp_scale, "c in log(1 + c v) for the heatmap")
        ->capture_default_str();
    exp->add_option("-o,--out", exp_prefix, "Output prefix; writes <prefix>.csv and <prefix>.pgm")
        ->required();

    // make-synth
    auto* synth = app.add_subcommand("make-synth", "Write a synthetic dataset directory");
    ConfigArgs synth_cfg;
    synth_cfg.attach(*synth);
    std::string synth_out;
    synth->add_option("-o,--out", synth_out, "Output directory")->required();

    // convert
    auto* conv = app.add_subcommand("convert", "Validate a dataset directory (and optionally rewrite it)");
    std::string conv_task = "node";
    std::string conv_in;
    std::string conv_out;
    conv->add_option("--task", conv_task, "node or graph")->capture_default_str();
    conv->add_option("dataset", conv_in, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    conv->add_option("-o,--out", conv_out, "Rewrite the normalized dataset here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (*train) {
        const jlgcn::TrainConfig cfg = train_cfg.build();
        const auto data = jlgcn::load_task_data(cfg);
        const auto result = jlgcn::train(cfg, data, progress_options(train_verbose));
        write_text(train_report, jlgcn::to_json(result.report, !train_no_timing));
        if (!train_ckpt.empty()) {
            jlgcn::save_checkpoint(result.checkpoint, train_ckpt);
        }
        print_summary(result.report);
        return 0;
    }

    if (*eval) {
        const auto ck = jlgcn::load_checkpoint(eval_ckpt);
        jlgcn::TrainConfig cfg = jlgcn::parse_config(ck.config_json);
        if (!eval_dataset.empty()) {
            cfg.dataset = eval_dataset;
        }
        const auto data = jlgcn::load_task_data(cfg);
        const auto r = jlgcn::evaluate(cfg, data, ck);
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "{\n  \"seed\": %llu,\n  \"train_acc\": %.17g,\n  \"val_acc\": %.17g,\n"
                      "  \"test_acc\": %.17g\n}",
                      static_cast<unsigned long long>(ck.rng_seed), r.train_acc, r.val_acc,
                      r.test_acc);
        write_text(eval_report, buf);
        return 0;
    }

    if (*abl) {
        const jlgcn::TrainConfig cfg = abl_cfg.build();
        jlgcn::AblationGrid grid;
        grid.lambda = grid_lambda.empty() ? std::vector<double>{cfg.lambda}
                                          : parse_grid(grid_lambda, "--lambda-grid");
        grid.edge_missing = grid_edge.empty() ? std::vector<double>{cfg.perturbation.edge_missing}
                                              : parse_grid(grid_edge, "--edge-missing-grid");
        grid.label_missing = grid_label.empty()
                                 ? std::vector<double>{cfg.perturbation.label_missing}
                                 : parse_grid(grid_label, "--label-missing-grid");
        grid.point_missing = grid_point.empty()
                                 ? std::vector<double>{cfg.perturbation.point_missing}
                                 : parse_grid(grid_point, "--point-missing-grid");
        const auto data = jlgcn::load_task_data(cfg);
        const auto rows = jlgcn::ablate(cfg, grid, data, progress_options(abl_verbose));
        write_text(abl_out, jlgcn::ablation_csv(rows));
        return 0;
    }

    if (*exp) {
        const auto ck = jlgcn::load_checkpoint(exp_ckpt);
        jlgcn::TrainConfig cfg = jlgcn::parse_config(ck.config_json);
        if (!exp_dataset.empty()) {
            cfg.dataset = exp_dataset;
        }
        if (cfg.task != jlgcn::Task::node) {
            throw jlgcn::ConfigError("export-graph supports node-task checkpoints only");
        }
        const auto data = jlgcn::load_task_data(cfg);
        const auto m = jlgcn::export_graph(cfg, std::get<jlgcn::DatasetBundle>(data), ck,
                                           exp_layer, exp_begin, exp_end);
        jlgcn::write_matrix_csv(m, exp_prefix + ".csv");
        jlgcn::write_heatmap_pgm(m, exp_scale, exp_prefix + ".pgm");
        std::fprintf(stderr, "wrote %s.csv and %s.pgm (%zu x %zu)\n", exp_prefix.c_str(),
                     exp_prefix.c_str(), m.rows(), m.cols());
        return 0;
    }

    if (*synth) {
        jlgcn::TrainConfig cfg = synth_cfg.build();
        cfg.dataset = "synth";
        const auto data = jlgcn::load_task_data(cfg);
        fs::create_directories(synth_out);
        if (const auto* bundle = std::get_if<jlgcn::DatasetBundle>(&data)) {
            jlgcn::save_citation(*bundle, synth_out);
            std::fprintf(stderr, "wrote %zu nodes, %zu edges, %zu classes to %s\n",
                         bundle->nodes(), bundle->edges.size(), bundle->num_classes,
                         synth_out.c_str());
        } else {
            const auto& coll = std::get<jlgcn::PointSetCollection>(data);
            jlgcn::save_pointsets(coll, synth_out);
            std::fprintf(stderr, "wrote %zu point sets, %zu classes to %s\n",
                         coll.instances.size(), coll.num_classes(), synth_out.c_str());
        }
        return 0;
    }

    if (*conv) {
        const jlgcn::Task task = jlgcn::parse_task(conv_task);
        if (task == jlgcn::Task::node) {
            const auto bundle = jlgcn::load_citation(conv_in);
            bundle.validate();
            std::printf("nodes %zu\nfeatures %zu\nclasses %zu\nedges %zu\n"
                        "self_loops_dropped %zu\nduplicate_edges %zu\n",
                        bundle.nodes(), bundle.feature_dim(), bundle.num_classes,
                        bundle.edges.size(), bundle.dropped_self_loops, bundle.duplicate_edges);
            if (!conv_out.empty()) {
                fs::create_directories(conv_out);
                jlgcn::save_citation(bundle, conv_out);
            }
        } else {
            const auto coll = jlgcn::load_pointsets(conv_in);
            std::printf("instances %zu\nclasses %zu\n", coll.instances.size(), coll.num_classes());
            if (!conv_out.empty()) {
                fs::create_directories(conv_out);
                jlgcn::save_pointsets(coll, conv_out);
            }
        }
        return 0;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // Dense N x N temporaries are allocated and freed many times per epoch;
    // keeping them on the heap avoids re-faulting fresh mmap pages each time.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    try {
        return run(argc, argv);
    } catch (const jlgcn::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const jlgcn::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const jlgcn::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const jlgcn::DegenerateGraphError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
