#include "jlgcn/data.hpp"

#include "jlgcn/errors.hpp"
#include "jlgcn/linalg.hpp"
#include "tsv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

namespace jlgcn {

namespace {

namespace fs = std::filesystem;
using detail::TsvReader;
using detail::open_out;

std::size_t lookup(const std::unordered_map<std::string, std::size_t>& index,
                   const TsvReader& reader, std::size_t field) {
    const auto it = index.find(reader.fields()[field]);
    if (it == index.end()) {
        throw IndexError(reader.path() + ":" + std::to_string(reader.line()) +
                         ": unknown node id '" + reader.fields()[field] + "'");
    }
    return it->second;
}

Mask select(const Mask& m, const std::vector<std::size_t>& keep) {
    Mask out(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out[k] = m[keep[k]];
    }
    return out;
}

} // namespace

DenseMatrix DatasetBundle::adjacency() const {
    DenseMatrix a(nodes(), nodes());
    for (const auto& [i, j] : edges) {
        a(i, j) = 1.0;
        a(j, i) = 1.0;
    }
    return a;
}

void DatasetBundle::validate() const {
    const std::size_t n = nodes();
    if (labels.size() != n || train.size() != n || val.size() != n || test.size() != n) {
        throw DataError(name + ": labels/masks do not cover all " + std::to_string(n) + " nodes");
    }
    if (!node_ids.empty() && node_ids.size() != n) {
        throw DataError(name + ": node id list has the wrong length");
    }
    for (const auto& [i, j] : edges) {
        if (i >= n || j >= n) {
            throw IndexError(name + ": edge endpoint out of range");
        }
        if (i >= j) {
            throw DataError(name + ": edge list contains a self-loop or unordered pair");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int split = int(train[i]) + int(val[i]) + int(test[i]);
        if (split > 1) {
            throw DataError(name + ": node " + std::to_string(i) + " is in several splits");
        }
        if (split == 1 && labels[i] < 0) {
            throw DataError(name + ": split node " + std::to_string(i) + " has no label");
        }
        if (labels[i] >= static_cast<int>(num_classes)) {
            throw DataError(name + ": label outside [0, num_classes)");
        }
    }
}

DatasetBundle load_citation(const std::filesystem::path& dir) {
    DatasetBundle b;
    b.name = dir.filename().string();
    if (b.name.empty()) {
        b.name = dir.parent_path().filename().string();
    }
    std::unordered_map<std::string, std::size_t> index;

    std::vector<double> values;
    std::size_t width = 0;
    {
        TsvReader r(dir / "features.tsv");
        while (r.next()) {
            const auto& f = r.fields();
            if (f.size() < 2) {
                r.fail("expected a node id followed by feature values");
            }
            if (b.node_ids.empty()) {
                width = f.size() - 1;
            } else if (f.size() - 1 != width) {
                r.fail("expected " + std::to_string(width) + " feature values, found " +
                       std::to_string(f.size() - 1));
            }
            if (!index.emplace(f[0], b.node_ids.size()).second) {
                r.fail("duplicate node id '" + f[0] + "'");
            }
            b.node_ids.push_back(f[0]);
            for (std::size_t k = 1; k < f.size(); ++k) {
                values.push_back(r.real(k));
            }
        }
    }
    const std::size_t n = b.node_ids.size();
    if (n == 0) {
        throw DataError((dir / "features.tsv").string() + ": no nodes");
    }
    b.features = linalg::l2_normalize_rows(DenseMatrix(n, width, std::move(values)));

    b.labels.assign(n, -1);
    {
        TsvReader r(dir / "labels.tsv");
        while (r.next()) {
            r.expect_fields(2);
            const std::size_t i = lookup(index, r, 0);
            const long long c = r.integer(1);
            if (c < 0 || c > std::numeric_limits<int>::max()) {
                r.fail("class id must be a non-negative integer");
            }
            b.labels[i] = static_cast<int>(c);
            b.num_classes = std::max(b.num_classes, static_cast<std::size_t>(c) + 1);
        }
    }

    {
        std::set<Edge> unique;
        std::size_t lines = 0;
        TsvReader r(dir / "edges.tsv");
        while (r.next()) {
            r.expect_fields(2);
            std::size_t i = lookup(index, r, 0);
            std::size_t j = lookup(index, r, 1);
            ++lines;
            if (i == j) {
                ++b.dropped_self_loops;
                continue;
            }
            if (i > j) {
                std::swap(i, j);
            }
            unique.insert({i, j});
        }
        b.edges.assign(unique.begin(), unique.end());
        b.duplicate_edges = lines - b.dropped_self_loops - b.edges.size();
    }

    b.train.assign(n, false);
    b.val.assign(n, false);
    b.test.assign(n, false);
    {
        TsvReader r(dir / "masks.tsv");
        std::vector<bool> seen(n, false);
        while (r.next()) {
            r.expect_fields(2);
            const std::size_t i = lookup(index, r, 0);
            if (seen[i]) {
                r.fail("node '" + r.fields()[0] + "' listed twice");
            }
            seen[i] = true;
            const std::string& split = r.fields()[1];
            if (split == "train") {
                b.train[i] = true;
            } else if (split == "val") {
                b.val[i] = true;
            } else if (split == "test") {
                b.test[i] = true;
            } else if (split != "none") {
                r.fail("unknown split '" + split + "'");
            }
            if (split != "none" && b.labels[i] < 0) {
                r.fail("node '" + r.fields()[0] + "' is in a split but has no label");
            }
        }
    }
    b.validate();
    return b;
}

void save_citation(const DatasetBundle& bundle, const std::filesystem::path& dir) {
    bundle.validate();
    fs::create_directories(dir);
    const std::size_t n = bundle.nodes();
    auto id = [&](std::size_t i) {
        return bundle.node_ids.empty() ? std::to_string(i) : bundle.node_ids[i];
    };
    {
        auto out = open_out(dir / "features.tsv");
        out << std::setprecision(17);
        for (std::size_t i = 0; i < n; ++i) {
            out << id(i);
            for (double v : bundle.features.row(i)) {
                out << '\t' << v;
            }
            out << '\n';
        }
    }
    {
        auto out = open_out(dir / "labels.tsv");
        for (std::size_t i = 0; i < n; ++i) {
            if (bundle.labels[i] >= 0) {
                out << id(i) << '\t' << bundle.labels[i] << '\n';
            }
        }
    }
    {
        auto out = open_out(dir / "edges.tsv");
        for (const auto& [i, j] : bundle.edges) {
            out << id(i) << '\t' << id(j) << '\n';
        }
    }
    {
        auto out = open_out(dir / "masks.tsv");
        for (std::size_t i = 0; i < n; ++i) {
            const char* split = bundle.train[i] ? "train"
                                : bundle.val[i] ? "val"
                                : bundle.test[i] ? "test"
                                                 : "none";
            out << id(i) << '\t' << split << '\n';
        }
    }
}

DatasetBundle subsample_nodes(const DatasetBundle& bundle, std::size_t budget, Rng& rng) {
    const std::size_t n = bundle.nodes();
    if (budget > n) {
        throw ConfigError("subsample: budget " + std::to_string(budget) + " exceeds " +
                          std::to_string(n) + " nodes");
    }
    std::vector<std::size_t> required;
    std::vector<std::size_t> optional;
    for (std::size_t i = 0; i < n; ++i) {
        (bundle.train[i] || bundle.val[i] || bundle.test[i] ? required : optional).push_back(i);
    }
    if (budget < required.size()) {
        throw ConfigError("subsample: budget " + std::to_string(budget) + " is below the " +
                          std::to_string(required.size()) + " split nodes");
    }
    rng.shuffle(std::span<std::size_t>(optional));
    std::vector<std::size_t> keep = required;
    keep.insert(keep.end(), optional.begin(),
                optional.begin() + static_cast<std::ptrdiff_t>(budget - required.size()));
    std::sort(keep.begin(), keep.end());

    std::vector<std::size_t> remap(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        remap[keep[k]] = k;
    }
    DatasetBundle out;
    out.name = bundle.name;
    out.num_classes = bundle.num_classes;
    out.features = DenseMatrix(keep.size(), bundle.feature_dim());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto src = bundle.features.row(keep[k]);
        std::copy(src.begin(), src.end(), out.features.row(k).begin());
        out.labels.push_back(bundle.labels[keep[k]]);
        if (!bundle.node_ids.empty()) {
            out.node_ids.push_back(bundle.node_ids[keep[k]]);
        }
    }
    for (const auto& [i, j] : bundle.edges) {
        if (remap[i] != std::numeric_limits<std::size_t>::max() &&
            remap[j] != std::numeric_limits<std::size_t>::max()) {
            out.edges.emplace_back(remap[i], remap[j]);
        }
    }
    out.train = select(bundle.train, keep);
    out.val = select(bundle.val, keep);
    out.test = select(bundle.test, keep);
    return out;
}

void PerturbationSpec::validate() const {
    if (!(edge_missing >= 0.0 && edge_missing <= 1.0)) {
        throw ConfigError("perturbation: edge_missing must lie in [0, 1]");
    }
    if (!(label_missing >= 0.0 && label_missing < 1.0)) {
        throw ConfigError("perturbation: label_missing must lie in [0, 1)");
    }
    if (!(point_missing >= 0.0 && point_missing < 1.0)) {
        throw ConfigError("perturbation: point_missing must lie in [0, 1)");
    }
}

DatasetBundle perturb(const DatasetBundle& bundle, const PerturbationSpec& spec) {
    spec.validate();
    DatasetBundle out = bundle;
    Rng rng(spec.seed);

    const auto drop_edges =
        static_cast<std::size_t>(std::floor(spec.edge_missing * static_cast<double>(bundle.edges.size())));
    if (drop_edges > 0) {
        std::vector<std::size_t> order(bundle.edges.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        std::vector<bool> removed(bundle.edges.size(), false);
        for (std::size_t k = 0; k < drop_edges; ++k) {
            removed[order[k]] = true;
        }
        out.edges.clear();
        for (std::size_t e = 0; e < bundle.edges.size(); ++e) {
            if (!removed[e]) {
                out.edges.push_back(bundle.edges[e]);
            }
        }
    }

    std::vector<std::size_t> train_nodes;
    for (std::size_t i = 0; i < bundle.nodes(); ++i) {
        if (bundle.train[i]) {
            train_nodes.push_back(i);
        }
    }
    const auto drop_labels = static_cast<std::size_t>(
        std::floor(spec.label_missing * static_cast<double>(train_nodes.size())));
    if (drop_labels > 0) {
        rng.shuffle(std::span<std::size_t>(train_nodes));
        for (std::size_t k = 0; k < drop_labels; ++k) {
            out.train[train_nodes[k]] = false;
        }
    }
    return out;
}

DatasetBundle synth_citation(const SynthCitationConfig& c) {
    if (c.nodes == 0 || c.classes == 0 || c.features < c.classes || c.words_per_node == 0) {
        throw ConfigError("synth_citation: nodes, classes, features and words must be positive");
    }
    if (c.train_per_class * c.classes + c.val + c.test > c.nodes) {
        throw ConfigError("synth_citation: splits need more nodes than requested");
    }
    Rng rng(c.seed);
    DatasetBundle b;
    b.name = "synth-citation";
    b.num_classes = c.classes;

    const std::size_t n = c.nodes;
    b.labels.resize(n);
    std::vector<std::vector<std::size_t>> members(c.classes);
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(rng.below(c.classes));
        b.labels[i] = static_cast<int>(y);
        members[y].push_back(i);
        b.node_ids.push_back(std::to_string(i));
    }
    for (std::size_t y = 0; y < c.classes; ++y) {
        if (members[y].size() < c.train_per_class) {
            throw ConfigError("synth_citation: class " + std::to_string(y) +
                              " has too few nodes for the training split");
        }
    }

    // bag of words: each class owns a contiguous topic block of the vocabulary
    const std::size_t block = c.features / c.classes;
    DenseMatrix f(n, c.features);
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(b.labels[i]);
        for (std::size_t w = 0; w < c.words_per_node; ++w) {
            const std::size_t word = rng.uniform() < c.class_word_fraction
                                         ? y * block + rng.below(block)
                                         : rng.below(c.features);
            f(i, word) = 1.0;
        }
    }
    b.features = linalg::l2_normalize_rows(f);

    std::set<Edge> edges;
    const auto target = static_cast<std::size_t>(c.average_degree * static_cast<double>(n) / 2.0);
    std::size_t attempts = 0;
    while (edges.size() < target && attempts < 50 * target + 100) {
        ++attempts;
        const auto u = static_cast<std::size_t>(rng.below(n));
        const auto& same = members[static_cast<std::size_t>(b.labels[u])];
        std::size_t v = rng.uniform() < c.homophily ? same[rng.below(same.size())]
                                                    : static_cast<std::size_t>(rng.below(n));
        if (u == v) {
            continue;
        }
        edges.insert({std::min(u, v), std::max(u, v)});
    }
    b.edges.assign(edges.begin(), edges.end());

    b.train.assign(n, false);
    b.val.assign(n, false);
    b.test.assign(n, false);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> per_class(c.classes, 0);
    std::vector<std::size_t> rest;
    for (std::size_t i : order) {
        auto& k = per_class[static_cast<std::size_t>(b.labels[i])];
        if (k < c.train_per_class) {
            b.train[i] = true;
            ++k;
        } else {
            rest.push_back(i);
        }
    }
    for (std::size_t k = 0; k < c.val + c.test; ++k) {
        (k < c.val ? b.val : b.test)[rest[k]] = true;
    }
    b.validate();
    return b;
}

} // namespace jlgcn
