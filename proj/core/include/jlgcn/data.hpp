#ifndef JLGCN_DATA_HPP
#define JLGCN_DATA_HPP

#include "jlgcn/loss.hpp"
#include "jlgcn/matrix.hpp"
#include "jlgcn/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace jlgcn {

/// Undirected edge stored with first < second.
using Edge = std::pair<std::size_t, std::size_t>;

/// One node-classification task instance.
///
/// Directory layout read by load_citation() and written by save_citation():
///
///   features.tsv  node-id <TAB> x_1 <TAB> ... <TAB> x_K   (defines node order)
///   labels.tsv    node-id <TAB> class-id                  (non-negative integer)
///   edges.tsv     node-id <TAB> node-id
///   masks.tsv     node-id <TAB> train|val|test|none
///
/// Blank lines and lines starting with '#' are ignored. Node ids are opaque
/// tokens. Nodes missing from labels.tsv are unlabeled (label -1) and may not
/// appear in any split; nodes missing from masks.tsv belong to no split.
struct DatasetBundle {
    std::string name;
    DenseMatrix features;            ///< N x K, rows unit-norm or zero
    std::vector<int> labels;         ///< class per node, -1 when unlabeled
    std::size_t num_classes = 0;
    std::vector<Edge> edges;         ///< sorted, unique, no self-loops
    Mask train;
    Mask val;
    Mask test;
    std::vector<std::string> node_ids;

    std::size_t dropped_self_loops = 0;  ///< reported by the loader
    std::size_t duplicate_edges = 0;     ///< repeated or reversed pairs merged

    std::size_t nodes() const noexcept { return features.rows(); }
    std::size_t feature_dim() const noexcept { return features.cols(); }

    /// Symmetric 0/1 adjacency of the edge list.
    DenseMatrix adjacency() const;

    /// Throws DataError if an invariant is broken.
    void validate() const;
};

/// Reads the documented TSV layout, L2-normalizes feature rows, merges
/// duplicate and reversed edges and drops self-loops.
/// Throws ParseError (with line number) or IndexError for dangling ids.
DatasetBundle load_citation(const std::filesystem::path& dir);

/// Writes the TSV layout; features with 17 significant digits.
void save_citation(const DatasetBundle& bundle, const std::filesystem::path& dir);

/// Induced subgraph on `budget` nodes: every split node is kept, the rest
/// are drawn uniformly; retained nodes keep their relative order.
/// Throws ConfigError if budget exceeds N or is below the split node count.
DatasetBundle subsample_nodes(const DatasetBundle& bundle, std::size_t budget, Rng& rng);

struct PerturbationSpec {
    double edge_missing = 0.0;   ///< [0, 1]
    double label_missing = 0.0;  ///< [0, 1)
    double point_missing = 0.0;  ///< [0, 1), used by the point-set task
    std::uint64_t seed = 0;

    void validate() const;
};

/// Removes floor(edge_missing * |E|) uniformly chosen edges and
/// floor(label_missing * |train|) training nodes. Features, validation and
/// test masks are untouched.
DatasetBundle perturb(const DatasetBundle& bundle, const PerturbationSpec& spec);

/// Planted-partition citation-like graph with sparse bag-of-words features
/// and Planetoid-style splits (per-class training nodes, then validation
/// and test nodes drawn from the remainder).
struct SynthCitationConfig {
    std::size_t nodes = 600;
    std::size_t classes = 4;
    std::size_t features = 200;
    std::size_t words_per_node = 12;
    double class_word_fraction = 0.6;  ///< share of a node's words drawn from its class topic
    double average_degree = 4.0;
    double homophily = 0.8;            ///< probability an edge stays inside the class
    std::size_t train_per_class = 20;
    std::size_t val = 100;
    std::size_t test = 200;
    std::uint64_t seed = 0;
};

DatasetBundle synth_citation(const SynthCitationConfig& config);

} // namespace jlgcn

#endif // JLGCN_DATA_HPP
