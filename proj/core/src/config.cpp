#include "jlgcn/config.hpp"

#include "jlgcn/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <utility>

namespace jlgcn {

using nlohmann::json;

namespace {

std::string snake(std::string_view key) {
    std::string out(key);
    std::replace(out.begin(), out.end(), '-', '_');
    return out;
}

std::string kebab(std::string_view key) {
    std::string out(key);
    std::replace(out.begin(), out.end(), '_', '-');
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const json& v, const char* expected) {
    throw ConfigError("config key '" + key + "': expected " + expected + ", got " + v.dump());
}

double get_real(const std::string& key, const json& v) {
    if (!v.is_number()) {
        bad_value(key, v, "a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        bad_value(key, v, "a finite number");
    }
    return x;
}

std::uint64_t get_count(const std::string& key, const json& v) {
    if (v.is_number_unsigned()) {
        return v.get<std::uint64_t>();
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (x >= 0.0 && x == std::floor(x) && x < 1.8e19) {
            return static_cast<std::uint64_t>(x);
        }
    }
    bad_value(key, v, "a non-negative integer");
}

bool get_bool(const std::string& key, const json& v) {
    if (!v.is_boolean()) {
        bad_value(key, v, "true or false");
    }
    return v.get<bool>();
}

std::string get_string(const std::string& key, const json& v) {
    if (!v.is_string()) {
        bad_value(key, v, "a string");
    }
    return v.get<std::string>();
}

template <typename U>
std::vector<U> get_counts(const std::string& key, const json& v) {
    if (!v.is_array()) {
        bad_value(key, v, "an array of non-negative integers");
    }
    std::vector<U> out;
    for (const auto& e : v) {
        out.push_back(static_cast<U>(get_count(key, e)));
    }
    return out;
}

using Setter = std::function<void(TrainConfig&, const json&)>;
using SetterTable = std::map<std::string, Setter, std::less<>>;

template <typename Section>
using SectionTable = std::map<std::string, std::function<void(Section&, const json&)>, std::less<>>;

template <typename Section>
void apply_section(Section& section, const std::string& name, const json& v,
                   const SectionTable<Section>& table) {
    if (!v.is_object()) {
        bad_value(name, v, "an object");
    }
    for (const auto& [key, value] : v.items()) {
        const auto it = table.find(snake(key));
        if (it == table.end()) {
            throw ConfigError("unknown config key '" + name + "." + key + "'");
        }
        it->second(section, value);
    }
}

const SectionTable<PerturbationSpec>& perturbation_table() {
    static const SectionTable<PerturbationSpec> table{
        {"edge_missing", [](auto& p, const json& v) { p.edge_missing = get_real("edge_missing", v); }},
        {"label_missing", [](auto& p, const json& v) { p.label_missing = get_real("label_missing", v); }},
        {"point_missing", [](auto& p, const json& v) { p.point_missing = get_real("point_missing", v); }},
        {"seed", [](auto& p, const json& v) { p.seed = get_count("seed", v); }},
    };
    return table;
}

const SectionTable<SynthCitationConfig>& synth_citation_table() {
    static const SectionTable<SynthCitationConfig> table{
        {"nodes", [](auto& s, const json& v) { s.nodes = get_count("nodes", v); }},
        {"classes", [](auto& s, const json& v) { s.classes = get_count("classes", v); }},
        {"features", [](auto& s, const json& v) { s.features = get_count("features", v); }},
        {"words_per_node", [](auto& s, const json& v) { s.words_per_node = get_count("words_per_node", v); }},
        {"class_word_fraction",
         [](auto& s, const json& v) { s.class_word_fraction = get_real("class_word_fraction", v); }},
        {"average_degree", [](auto& s, const json& v) { s.average_degree = get_real("average_degree", v); }},
        {"homophily", [](auto& s, const json& v) { s.homophily = get_real("homophily", v); }},
        {"train_per_class", [](auto& s, const json& v) { s.train_per_class = get_count("train_per_class", v); }},
        {"val", [](auto& s, const json& v) { s.val = get_count("val", v); }},
        {"test", [](auto& s, const json& v) { s.test = get_count("test", v); }},
        {"seed", [](auto& s, const json& v) { s.seed = get_count("seed", v); }},
    };
    return table;
}

const SectionTable<SynthPointsConfig>& synth_points_table() {
    static const SectionTable<SynthPointsConfig> table{
        {"families",
         [](auto& s, const json& v) {
             if (!v.is_array()) {
                 bad_value("families", v, "an array of shape family names");
             }
             s.families.clear();
             for (const auto& e : v) {
                 s.families.push_back(parse_shape_family(get_string("families", e)));
             }
         }},
        {"per_class", [](auto& s, const json& v) { s.per_class = get_count("per_class", v); }},
        {"points", [](auto& s, const json& v) { s.points = get_count("points", v); }},
        {"noise", [](auto& s, const json& v) { s.noise = get_real("noise", v); }},
        {"test_fraction", [](auto& s, const json& v) { s.test_fraction = get_real("test_fraction", v); }},
        {"val_fraction", [](auto& s, const json& v) { s.val_fraction = get_real("val_fraction", v); }},
        {"seed", [](auto& s, const json& v) { s.seed = get_count("seed", v); }},
    };
    return table;
}

const SetterTable& setters() {
    static const SetterTable table{
        {"task", [](TrainConfig& c, const json& v) { c.task = parse_task(get_string("task", v)); }},
        {"dataset", [](TrainConfig& c, const json& v) { c.dataset = get_string("dataset", v); }},
        {"hidden", [](TrainConfig& c, const json& v) { c.hidden = get_counts<std::size_t>("hidden", v); }},
        {"head", [](TrainConfig& c, const json& v) { c.head = get_counts<std::size_t>("head", v); }},
        {"mode", [](TrainConfig& c, const json& v) { c.mode = parse_layer_mode(get_string("mode", v)); }},
        {"rank", [](TrainConfig& c, const json& v) { c.rank = get_count("rank", v); }},
        {"r_init", [](TrainConfig& c, const json& v) { c.r_init = parse_metric_init(get_string("r_init", v)); }},
        {"r_std", [](TrainConfig& c, const json& v) { c.r_std = get_real("r_std", v); }},
        {"glr_signal",
         [](TrainConfig& c, const json& v) { c.glr_signal = parse_glr_signal(get_string("glr_signal", v)); }},
        {"graph_from",
         [](TrainConfig& c, const json& v) { c.graph_from = parse_graph_from(get_string("graph_from", v)); }},
        {"accumulation",
         [](TrainConfig& c, const json& v) {
             c.accumulation = parse_graph_accumulation(get_string("accumulation", v));
         }},
        {"bias", [](TrainConfig& c, const json& v) { c.bias = get_bool("bias", v); }},
        {"decay_metric", [](TrainConfig& c, const json& v) { c.decay_metric = get_bool("decay_metric", v); }},
        {"lambda", [](TrainConfig& c, const json& v) { c.lambda = get_real("lambda", v); }},
        {"lr", [](TrainConfig& c, const json& v) { c.lr = get_real("lr", v); }},
        {"weight_decay", [](TrainConfig& c, const json& v) { c.weight_decay = get_real("weight_decay", v); }},
        {"decay_factor", [](TrainConfig& c, const json& v) { c.decay_factor = get_real("decay_factor", v); }},
        {"decay_period", [](TrainConfig& c, const json& v) { c.decay_period = get_count("decay_period", v); }},
        {"epochs", [](TrainConfig& c, const json& v) { c.epochs = get_count("epochs", v); }},
        {"batch_size", [](TrainConfig& c, const json& v) { c.batch_size = get_count("batch_size", v); }},
        {"dropout", [](TrainConfig& c, const json& v) { c.dropout = get_real("dropout", v); }},
        {"dropout_all_layers",
         [](TrainConfig& c, const json& v) { c.dropout_all_layers = get_bool("dropout_all_layers", v); }},
        {"leaky_slope", [](TrainConfig& c, const json& v) { c.leaky_slope = get_real("leaky_slope", v); }},
        {"bn_momentum", [](TrainConfig& c, const json& v) { c.bn_momentum = get_real("bn_momentum", v); }},
        {"reduction",
         [](TrainConfig& c, const json& v) { c.reduction = parse_reduction(get_string("reduction", v)); }},
        {"selection",
         [](TrainConfig& c, const json& v) { c.selection = parse_selection(get_string("selection", v)); }},
        {"patience", [](TrainConfig& c, const json& v) { c.patience = get_count("patience", v); }},
        {"seeds",
         [](TrainConfig& c, const json& v) {
             if (v.is_number()) {
                 c.seeds = {get_count("seeds", v)};
             } else {
                 c.seeds = get_counts<std::uint64_t>("seeds", v);
             }
         }},
        {"perturbation",
         [](TrainConfig& c, const json& v) {
             apply_section(c.perturbation, "perturbation", v, perturbation_table());
         }},
        {"edge_missing",
         [](TrainConfig& c, const json& v) { c.perturbation.edge_missing = get_real("edge_missing", v); }},
        {"label_missing",
         [](TrainConfig& c, const json& v) { c.perturbation.label_missing = get_real("label_missing", v); }},
        {"point_missing",
         [](TrainConfig& c, const json& v) { c.perturbation.point_missing = get_real("point_missing", v); }},
        {"use_ground_truth_graph",
         [](TrainConfig& c, const json& v) {
             c.use_ground_truth_graph = get_bool("use_ground_truth_graph", v);
         }},
        {"subsample", [](TrainConfig& c, const json& v) { c.subsample = get_count("subsample", v); }},
        {"precision",
         [](TrainConfig& c, const json& v) { c.precision = parse_precision(get_string("precision", v)); }},
        {"synth_citation",
         [](TrainConfig& c, const json& v) {
             apply_section(c.synth_citation, "synth_citation", v, synth_citation_table());
         }},
        {"synth_points",
         [](TrainConfig& c, const json& v) {
             apply_section(c.synth_points, "synth_points", v, synth_points_table());
         }},
    };
    return table;
}

void apply_json(TrainConfig& config, const json& doc) {
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        const std::string name = snake(key);
        if (name == "profile") {
            continue;
        }
        const auto it = setters().find(name);
        if (it == setters().end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        it->second(config, value);
    }
}

template <typename E, std::size_t N>
E parse_named(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& names,
              const char* what) {
    for (const auto& [name, value] : names) {
        if (name == s) {
            return value;
        }
    }
    throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::array<std::pair<std::string_view, E>, N>& names) {
    for (const auto& [name, value] : names) {
        if (value == v) {
            return name;
        }
    }
    return "?";
}

constexpr std::array<std::pair<std::string_view, Task>, 2> kTasks{{
    {"node", Task::node},
    {"graph", Task::graph},
}};
constexpr std::array<std::pair<std::string_view, Selection>, 2> kSelections{{
    {"best_val", Selection::best_val},
    {"final", Selection::final_epoch},
}};
constexpr std::array<std::pair<std::string_view, Precision>, 2> kPrecisions{{
    {"f32", Precision::f32},
    {"f64", Precision::f64},
}};

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw ConfigError(message);
    }
}

} // namespace

std::string_view to_string(Task t) { return name_of(t, kTasks); }
std::string_view to_string(Selection s) { return name_of(s, kSelections); }
std::string_view to_string(Precision p) { return name_of(p, kPrecisions); }
Task parse_task(std::string_view s) { return parse_named(s, kTasks, "task"); }
Selection parse_selection(std::string_view s) { return parse_named(s, kSelections, "selection"); }

Precision parse_precision(std::string_view s) {
    if (s == "float") {
        return Precision::f32;
    }
    if (s == "double") {
        return Precision::f64;
    }
    return parse_named(s, kPrecisions, "precision");
}

void TrainConfig::validate() const {
    for (std::size_t w : hidden) {
        require(w > 0, "hidden widths must be positive");
    }
    for (std::size_t w : head) {
        require(w > 0, "head widths must be positive");
    }
    require(task != Task::graph || !hidden.empty(), "graph task needs at least one graph layer");
    require(rank > 0, "rank must be positive");
    require(r_std > 0.0, "r_std must be positive");
    require(lambda >= 0.0, "lambda must be non-negative");
    require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
    require(leaky_slope >= 0.0 && leaky_slope < 1.0, "leaky_slope must lie in [0, 1)");
    require(bn_momentum >= 0.0 && bn_momentum < 1.0, "bn_momentum must lie in [0, 1)");
    require(batch_size > 0, "batch_size must be positive");
    require(!seeds.empty(), "at least one seed is required");
    adam().validate();
    perturbation.validate();
    if (task == Task::node) {
        require(perturbation.point_missing == 0.0, "point_missing applies to the graph task only");
    } else {
        require(perturbation.edge_missing == 0.0, "edge_missing applies to the node task only");
        require(subsample == 0, "subsample applies to the node task only");
        require(synth_points.points >= 8, "synth_points.points must be at least 8");
        require(synth_points.per_class > 0, "synth_points.per_class must be positive");
        require(!synth_points.families.empty(), "synth_points.families is empty");
        require(synth_points.noise >= 0.0, "synth_points.noise must be non-negative");
        require(synth_points.test_fraction > 0.0 && synth_points.val_fraction >= 0.0 &&
                    synth_points.test_fraction + synth_points.val_fraction < 1.0,
                "synth_points fractions must leave training instances");
    }
}

void TrainConfig::validate_for(std::size_t feature_dim) const {
    validate();
    if (r_init == MetricInit::identity && mode != LayerMode::plain_gcn) {
        require(rank == feature_dim, "r_init=identity requires rank == feature dimension (" +
                                         std::to_string(feature_dim) + "), got " +
                                         std::to_string(rank));
    }
}

AdamConfig TrainConfig::adam() const {
    AdamConfig a;
    a.lr = lr;
    a.weight_decay = weight_decay;
    a.decay_factor = decay_factor;
    a.decay_period = decay_period;
    return a;
}

LayerOptions TrainConfig::layer_options() const {
    LayerOptions o;
    o.mode = mode;
    o.rank = rank;
    o.graph_from = graph_from;
    o.glr_signal = glr_signal;
    o.accumulation = accumulation;
    o.bias = bias;
    o.r_init = r_init;
    o.r_std = r_std;
    o.decay_metric = decay_metric;
    return o;
}

NodeNetConfig TrainConfig::node_net(std::size_t feature_dim, std::size_t classes) const {
    NodeNetConfig n;
    n.widths.push_back(feature_dim);
    n.widths.insert(n.widths.end(), hidden.begin(), hidden.end());
    n.widths.push_back(classes);
    n.layer = layer_options();
    n.dropout = dropout;
    n.dropout_all_layers = dropout_all_layers;
    n.leaky_slope = leaky_slope;
    return n;
}

GraphNetConfig TrainConfig::graph_net(std::size_t classes) const {
    GraphNetConfig g;
    g.in_dim = 3;
    g.widths = hidden;
    g.head = head;
    g.classes = classes;
    g.layer = layer_options();
    g.head_dropout = dropout;
    g.leaky_slope = leaky_slope;
    g.bn_momentum = bn_momentum;
    return g;
}

TrainConfig profile(std::string_view name) {
    TrainConfig c;
    if (name == "cora" || name == "citeseer" || name == "pubmed") {
        c.dataset = "";
        c.dropout_all_layers = true;
        if (name == "pubmed") {
            c.subsample = 10000;
        }
        return c;
    }
    if (name == "pointset") {
        c.task = Task::graph;
        c.dataset = "synth";
        c.hidden = {64, 128, 1024};
        c.head = {512, 256};
        c.mode = LayerMode::jlgcn_concat;
        c.lr = 0.001;
        c.epochs = 400;
        c.decay_period = 40;
        c.batch_size = 32;
        c.weight_decay = 1e-4;
        c.lambda = 0.01;
        c.use_ground_truth_graph = false;
        c.seeds = {0};
        return c;
    }
    throw ConfigError("unknown profile '" + std::string(name) + "'");
}

std::vector<std::string> profile_names() { return {"cora", "citeseer", "pubmed", "pointset"}; }

std::string to_json(const TrainConfig& c) {
    json families = json::array();
    for (ShapeFamily f : c.synth_points.families) {
        families.push_back(std::string(to_string(f)));
    }
    const json doc{
        {"task", to_string(c.task)},
        {"dataset", c.dataset},
        {"hidden", c.hidden},
        {"head", c.head},
        {"mode", to_string(c.mode)},
        {"rank", c.rank},
        {"r_init", to_string(c.r_init)},
        {"r_std", c.r_std},
        {"glr_signal", to_string(c.glr_signal)},
        {"graph_from", to_string(c.graph_from)},
        {"accumulation", to_string(c.accumulation)},
        {"bias", c.bias},
        {"decay_metric", c.decay_metric},
        {"lambda", c.lambda},
        {"lr", c.lr},
        {"weight_decay", c.weight_decay},
        {"decay_factor", c.decay_factor},
        {"decay_period", c.decay_period},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"dropout", c.dropout},
        {"dropout_all_layers", c.dropout_all_layers},
        {"leaky_slope", c.leaky_slope},
        {"bn_momentum", c.bn_momentum},
        {"reduction", to_string(c.reduction)},
        {"selection", to_string(c.selection)},
        {"patience", c.patience},
        {"seeds", c.seeds},
        {"perturbation",
         {{"edge_missing", c.perturbation.edge_missing},
          {"label_missing", c.perturbation.label_missing},
          {"point_missing", c.perturbation.point_missing},
          {"seed", c.perturbation.seed}}},
        {"use_ground_truth_graph", c.use_ground_truth_graph},
        {"subsample", c.subsample},
        {"precision", to_string(c.precision)},
        {"synth_citation",
         {{"nodes", c.synth_citation.nodes},
          {"classes", c.synth_citation.classes},
          {"features", c.synth_citation.features},
          {"words_per_node", c.synth_citation.words_per_node},
          {"class_word_fraction", c.synth_citation.class_word_fraction},
          {"average_degree", c.synth_citation.average_degree},
          {"homophily", c.synth_citation.homophily},
          {"train_per_class", c.synth_citation.train_per_class},
          {"val", c.synth_citation.val},
          {"test", c.synth_citation.test},
          {"seed", c.synth_citation.seed}}},
        {"synth_points",
         {{"families", families},
          {"per_class", c.synth_points.per_class},
          {"points", c.synth_points.points},
          {"noise", c.synth_points.noise},
          {"test_fraction", c.synth_points.test_fraction},
          {"val_fraction", c.synth_points.val_fraction},
          {"seed", c.synth_points.seed}}},
    };
    return doc.dump(2);
}

TrainConfig parse_config(std::string_view json_text, const TrainConfig& base) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    TrainConfig config = base;
    if (doc.is_object() && doc.contains("profile")) {
        config = profile(get_string("profile", doc["profile"]));
    }
    apply_json(config, doc);
    return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

void apply_override(TrainConfig& config, std::string_view key, std::string_view value) {
    json v;
    try {
        v = json::parse(value);
    } catch (const json::parse_error&) {
        v = std::string(value);
    }
    // nest dotted keys: "synth-points.noise" -> {"synth_points": {"noise": v}}
    std::string path = snake(key);
    std::size_t dot;
    while ((dot = path.rfind('.')) != std::string::npos) {
        v = json{{path.substr(dot + 1), v}};
        path.resize(dot);
    }
    if (path == "profile") {
        throw ConfigError("'profile' cannot be overridden; pass it first");
    }
    apply_json(config, json{{path, v}});
}

std::vector<std::string> override_keys() {
    std::vector<std::string> keys;
    for (const auto& entry : setters()) {
        keys.push_back(kebab(entry.first));
    }
    return keys;
}

} // namespace jlgcn
