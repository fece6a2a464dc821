#include "doctest.h"

#include "jlgcn/checkpoint.hpp"
#include "jlgcn/config.hpp"
#include "jlgcn/errors.hpp"
#include "jlgcn/export.hpp"
#include "jlgcn/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

using namespace jlgcn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("jlgcn_cli_" + tag + "_" + std::to_string(static_cast<long>(::getpid())));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TrainConfig small_node_config() {
    TrainConfig cfg;
    cfg.synth_citation.nodes = 150;
    cfg.synth_citation.classes = 3;
    cfg.synth_citation.features = 40;
    cfg.synth_citation.train_per_class = 5;
    cfg.synth_citation.val = 30;
    cfg.synth_citation.test = 60;
    cfg.rank = 8;
    cfg.hidden = {8};
    cfg.epochs = 15;
    cfg.seeds = {0, 1};
    return cfg;
}

TrainConfig small_graph_config() {
    TrainConfig cfg = profile("pointset");
    cfg.hidden = {8, 16};
    cfg.head = {16};
    cfg.rank = 3;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.synth_points.per_class = 4;
    cfg.synth_points.points = 24;
    cfg.synth_points.test_fraction = 0.25;
    cfg.synth_points.val_fraction = 0.25;
    return cfg;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(JLGCN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("default config carries the citation hyperparameters") {
    const TrainConfig cfg;
    CHECK(cfg.lr == doctest::Approx(0.1));
    CHECK(cfg.epochs == 500);
    CHECK(cfg.rank == 16);
    CHECK(cfg.lambda == doctest::Approx(1e-4));
    CHECK(cfg.weight_decay == doctest::Approx(5e-4));
    CHECK(cfg.decay_factor == doctest::Approx(0.5));
    CHECK(cfg.decay_period == 100);
    CHECK(cfg.hidden == std::vector<std::size_t>{16});
    CHECK(cfg.dropout == doctest::Approx(0.5));
    CHECK(cfg.seeds.size() == 10);

    const TrainConfig ps = profile("pointset");
    CHECK(ps.task == Task::graph);
    CHECK(ps.hidden == std::vector<std::size_t>{64, 128, 1024});
    CHECK(ps.lr == doctest::Approx(0.001));
    CHECK(ps.epochs == 400);
    CHECK(ps.lambda == doctest::Approx(0.01));
    CHECK_THROWS_AS(profile("imagenet"), ConfigError);
}

TEST_CASE("config json round trips and rejects unknown keys") {
    TrainConfig cfg = profile("citeseer");
    cfg.hidden = {32, 16};
    cfg.perturbation.edge_missing = 0.25;
    cfg.precision = Precision::f32;
    const std::string text = to_json(cfg);
    CHECK(to_json(parse_config(text)) == text);

    CHECK_THROWS_AS(parse_config(R"({"learning_rate": 0.1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"epochs": "many"})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
    CHECK(parse_config(R"({"profile": "pubmed"})").subsample == 10000);
}

TEST_CASE("overrides accept kebab, snake and nested keys") {
    TrainConfig cfg;
    apply_override(cfg, "edge-missing", "0.5");
    apply_override(cfg, "weight_decay", "0.001");
    apply_override(cfg, "hidden", "[32,16]");
    apply_override(cfg, "synth-points.noise", "0.1");
    apply_override(cfg, "mode", "plain_gcn");
    CHECK(cfg.perturbation.edge_missing == doctest::Approx(0.5));
    CHECK(cfg.weight_decay == doctest::Approx(0.001));
    CHECK(cfg.hidden == std::vector<std::size_t>{32, 16});
    CHECK(cfg.synth_points.noise == doctest::Approx(0.1));
    CHECK(cfg.mode == LayerMode::plain_gcn);
    CHECK_THROWS_AS(apply_override(cfg, "no-such-key", "1"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "mode", "resnet"), ConfigError);
}

TEST_CASE("validation rejects out-of-range values") {
    TrainConfig cfg;
    cfg.lr = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.seeds.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.perturbation.point_missing = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = {};
    cfg.r_init = MetricInit::identity;
    cfg.rank = 16;
    CHECK_THROWS_AS(cfg.validate_for(40), ConfigError);
    CHECK_NOTHROW(cfg.validate_for(16));
    cfg.mode = LayerMode::plain_gcn;
    CHECK_NOTHROW(cfg.validate_for(40));
}

TEST_CASE("checkpoint save, load, save is byte identical") {
    TempDir dir("ck");
    Checkpoint ck;
    ck.rng_seed = 42;
    ck.rng_position = 1234;
    ck.config_json = to_json(TrainConfig{});
    ck.tensors.push_back({"layer0.w", 2, 3, {1, -2, 3.5, 1e-300, -0.0, 7}});
    ck.tensors.push_back({"bn0.gamma", 1, 1, {0.125}});
    save_checkpoint(ck, dir.path / "a.ck");
    const Checkpoint back = load_checkpoint(dir.path / "a.ck");
    CHECK(back == ck);
    save_checkpoint(back, dir.path / "b.ck");
    CHECK(slurp(dir.path / "a.ck") == slurp(dir.path / "b.ck"));

    ck.dtype = 4;
    const Checkpoint narrow = deserialize(serialize(ck));
    CHECK(narrow.tensors[0].values[2] == 3.5);
    CHECK(narrow.tensors[0].values[3] == 0.0);
}

TEST_CASE("corrupted checkpoints are refused") {
    Checkpoint ck;
    ck.tensors.push_back({"w", 2, 2, {1, 2, 3, 4}});
    const auto good = serialize(ck);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize(bad_magic), CheckpointError);

    // flip the row count of the tensor; the checksum catches it
    auto edited = good;
    const std::size_t rows_at = 8 + 4 + 4 + 8 + 8 + 8 + ck.config_json.size() + 8 + 4 + 1;
    edited[rows_at] = 3;
    CHECK_THROWS_AS(deserialize(edited), CheckpointError);

    auto truncated = good;
    truncated.resize(truncated.size() - 12);
    CHECK_THROWS_AS(deserialize(truncated), CheckpointError);

    CHECK_THROWS_AS(deserialize(std::vector<std::uint8_t>{}), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ck"), CheckpointError);
}

TEST_CASE("restore checks names and shapes") {
    Checkpoint ck;
    ck.tensors.push_back({"w", 2, 2, {1, 2, 3, 4}});
    DenseMatrix w(2, 2);
    std::vector<ParamRef<double>> params{{"w", &w}};
    restore<double>(ck, params);
    CHECK(w(1, 0) == 3.0);

    DenseMatrix wrong(3, 2);
    std::vector<ParamRef<double>> mismatched{{"w", &wrong}};
    CHECK_THROWS_AS(restore<double>(ck, mismatched), CheckpointError);
    std::vector<ParamRef<double>> missing{{"v", &w}};
    CHECK_THROWS_AS(restore<double>(ck, missing), CheckpointError);

    Checkpoint captured;
    capture<double>(captured, params);
    CHECK(captured.tensors == ck.tensors);
}

TEST_CASE("matrix csv round trips and heatmap levels follow the log scale") {
    TempDir dir("csv");
    DenseMatrix m(2, 3);
    m(0, 0) = 1.0 / 3.0;
    m(0, 1) = -2.5e-7;
    m(0, 2) = 12345.678901;
    m(1, 0) = 0.0;
    m(1, 1) = 1.0;
    m(1, 2) = 0.5;
    write_matrix_csv(m, dir.path / "m.csv");
    const DenseMatrix back = read_matrix_csv(dir.path / "m.csv");
    REQUIRE(back.rows() == 2);
    REQUIRE(back.cols() == 3);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(std::abs(back(i, j) - m(i, j)) <= 1e-9 * std::max(1.0, std::abs(m(i, j))));
        }
    }

    std::ofstream(dir.path / "ragged.csv") << "1,2\n3\n";
    CHECK_THROWS_AS(read_matrix_csv(dir.path / "ragged.csv"), ParseError);
    std::ofstream(dir.path / "text.csv") << "1,x\n";
    CHECK_THROWS_AS(read_matrix_csv(dir.path / "text.csv"), ParseError);

    DenseMatrix h(1, 3);
    h(0, 0) = 0.0;
    h(0, 1) = 0.5;
    h(0, 2) = 1.0;
    const auto levels = heatmap_levels(h, 10.0);
    CHECK(levels[0] == 0);
    CHECK(levels[2] == 255);
    const double expect = 255.0 * std::log1p(5.0) / std::log1p(10.0);
    CHECK(std::abs(levels[1] - expect) <= 1.0);
    CHECK_THROWS_AS(heatmap_levels(h, 0.0), ConfigError);

    write_heatmap_pgm(h, 10.0, dir.path / "h.pgm");
    const std::string pgm = slurp(dir.path / "h.pgm");
    const std::string header = "P5\n3 1\n255\n";
    REQUIRE(pgm.size() == header.size() + 3);
    CHECK(pgm.substr(0, header.size()) == header);
    CHECK(static_cast<unsigned char>(pgm.back()) == 255);
}

TEST_CASE("summaries use the sample standard deviation") {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    const Summary s = summarize(xs);
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
    const std::vector<double> one{0.7};
    CHECK(summarize(one).std == 0.0);
}

TEST_CASE("training is deterministic and eval reproduces the selected state") {
    const TrainConfig cfg = small_node_config();
    const TaskData data = load_task_data(cfg);
    const TrainResult a = train(cfg, data);
    const TrainResult b = train(cfg, data);
    CHECK(to_json(a.report, false) == to_json(b.report, false));
    CHECK(serialize(a.checkpoint) == serialize(b.checkpoint));
    REQUIRE(a.report.runs.size() == 2);
    CHECK(a.report.runs[0].train_loss.size() == cfg.epochs);

    const TrainConfig from_ck = parse_config(a.checkpoint.config_json);
    const EvalReport ev = evaluate(from_ck, data, a.checkpoint);
    CHECK(ev.test_acc == a.report.runs[0].selected_test_acc);

    Checkpoint narrow = a.checkpoint;
    narrow.dtype = 4;
    CHECK_THROWS_AS(evaluate(from_ck, data, narrow), CheckpointError);
}

TEST_CASE("zero epochs keep the initial state") {
    TrainConfig cfg = small_node_config();
    cfg.epochs = 0;
    const TaskData data = load_task_data(cfg);
    const TrainResult r = train(cfg, data);
    for (const auto& run : r.report.runs) {
        CHECK(run.epochs_run == 0);
        CHECK(run.selected_epoch == 0);
        CHECK(run.final_test_acc == run.selected_test_acc);
    }
    const EvalReport ev = evaluate(cfg, data, r.checkpoint);
    CHECK(ev.test_acc == r.report.runs[0].selected_test_acc);
}

TEST_CASE("ablation cells match plain training and aggregate their seeds") {
    const TrainConfig cfg = small_node_config();
    const TaskData data = load_task_data(cfg);
    const TrainResult single = train(cfg, data);

    AblationGrid one{{cfg.lambda}, {0.0}, {0.0}, {0.0}};
    const auto rows = ablate(cfg, one, data);
    REQUIRE(rows.size() == cfg.seeds.size() + 2);
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
        CHECK(rows[s].kind == "seed");
        CHECK(rows[s].seed == cfg.seeds[s]);
        CHECK(rows[s].selected_test_acc == single.report.runs[s].selected_test_acc);
    }

    AblationGrid grid{{0.0, 1e-3}, {0.0, 0.5}, {0.0}, {0.0}};
    const auto cells = ablate(cfg, grid, data);
    REQUIRE(cells.size() == 4 * (cfg.seeds.size() + 2));
    for (std::size_t c = 0; c < 4; ++c) {
        const std::size_t base = c * (cfg.seeds.size() + 2);
        std::vector<double> sel;
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
            sel.push_back(cells[base + s].selected_test_acc);
        }
        const Summary sum = summarize(sel);
        const AblationRow& mean = cells[base + cfg.seeds.size()];
        const AblationRow& sd = cells[base + cfg.seeds.size() + 1];
        CHECK(mean.kind == "mean");
        CHECK(sd.kind == "std");
        CHECK(!mean.seed.has_value());
        CHECK(std::abs(mean.selected_test_acc - sum.mean) <= 1e-12);
        CHECK(std::abs(sd.selected_test_acc - sum.std) <= 1e-12);
    }

    const std::string csv = ablation_csv(cells);
    CHECK(csv.rfind("kind,lambda,edge_missing,label_missing,point_missing,seed,final_train_acc,"
                    "final_val_acc,final_test_acc,selected_test_acc\n",
                    0) == 0);
    CHECK_THROWS_AS(ablate(cfg, AblationGrid{{}, {0.0}, {0.0}, {0.0}}, data), ConfigError);
}

TEST_CASE("exported ground-truth graph is a symmetric 0/1 block") {
    TrainConfig cfg = small_node_config();
    cfg.epochs = 2;
    cfg.seeds = {0};
    const TaskData data = load_task_data(cfg);
    const TrainResult r = train(cfg, data);
    const auto& bundle = std::get<DatasetBundle>(data);

    const DenseMatrix g = export_graph(cfg, bundle, r.checkpoint, -1, 10, 40);
    REQUIRE(g.rows() == 30);
    REQUIRE(g.cols() == 30);
    for (std::size_t i = 0; i < 30; ++i) {
        for (std::size_t j = 0; j < 30; ++j) {
            CHECK((g(i, j) == 0.0 || g(i, j) == 1.0));
            CHECK(g(i, j) == g(j, i));
        }
    }

    const DenseMatrix learned = export_graph(cfg, bundle, r.checkpoint, 0, 0, 20);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(learned(i, i) == doctest::Approx(1.0));
        for (std::size_t j = 0; j < 20; ++j) {
            CHECK(learned(i, j) > 0.0);
            CHECK(learned(i, j) <= 1.0);
            CHECK(learned(i, j) == doctest::Approx(learned(j, i)));
        }
    }

    CHECK_THROWS_AS(export_graph(cfg, bundle, r.checkpoint, 5, 0, 20), ConfigError);
    CHECK_THROWS_AS(export_graph(cfg, bundle, r.checkpoint, 0, 20, 10), ConfigError);
    CHECK_THROWS_AS(export_graph(cfg, bundle, r.checkpoint, 0, 0, 100000), ConfigError);
}

TEST_CASE("point-set training runs, reproduces, and drops test points") {
    TrainConfig cfg = small_graph_config();
    const TaskData data = load_task_data(cfg);
    const TrainResult a = train(cfg, data);
    const TrainResult b = train(cfg, data);
    CHECK(to_json(a.report, false) == to_json(b.report, false));
    const EvalReport ev = evaluate(parse_config(a.checkpoint.config_json), data, a.checkpoint);
    CHECK(ev.test_acc == a.report.runs[0].selected_test_acc);

    cfg.perturbation.point_missing = 0.5;
    const TrainResult dropped = train(cfg, data);
    CHECK(dropped.report.runs[0].epochs_run == cfg.epochs);

    cfg.perturbation.point_missing = 0.0;
    cfg.perturbation.edge_missing = 0.5;
    CHECK_THROWS_AS(train(cfg, data), ConfigError);
}

TEST_CASE("the command line maps failures to exit codes") {
    TempDir dir("proc");
    const std::string small =
        " --seeds [0] --epochs 3 --rank 8 --hidden [8] --set synth-citation.nodes=150"
        " --set synth-citation.features=40 --set synth-citation.val=30"
        " --set synth-citation.test=60 --set synth-citation.train-per-class=5";
    const std::string ck = (dir.path / "m.ck").string();
    const std::string report = (dir.path / "r.json").string();

    CHECK(run_cli("train" + small + " --checkpoint " + ck + " --report " + report) == 0);
    CHECK(fs::file_size(ck) > 0);
    CHECK(slurp(report).find("selected_test_acc") != std::string::npos);
    CHECK(run_cli("eval --checkpoint " + ck) == 0);
    CHECK(run_cli("export-graph --checkpoint " + ck + " --layer -1 --end 20 -o " +
                  (dir.path / "g").string()) == 0);
    CHECK(fs::exists(dir.path / "g.csv"));
    CHECK(fs::exists(dir.path / "g.pgm"));

    CHECK(run_cli("make-synth" + small + " -o " + (dir.path / "ds").string()) == 0);
    CHECK(run_cli("train" + small + " --dataset " + (dir.path / "ds").string()) == 0);
    CHECK(run_cli("convert " + (dir.path / "ds").string()) == 0);

    CHECK(run_cli("") == 2);
    CHECK(run_cli("train --lr -1") == 2);
    CHECK(run_cli("train --no-such-flag") == 2);
    CHECK(run_cli("train --dataset " + (dir.path / "missing").string()) == 3);

    std::ofstream(dir.path / "junk.ck") << "not a checkpoint";
    CHECK(run_cli("eval --checkpoint " + (dir.path / "junk.ck").string()) == 3);
}
