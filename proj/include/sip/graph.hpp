#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

namespace sip {

using NodeId = std::size_t;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 1.0;
};

/**
 * Undirected weighted graph in compressed sparse row layout.
 *
 * Every undirected edge {i,j} is stored twice, as (i,j,w) and (j,i,w); column
 * indices within a row are strictly increasing. Instances are immutable; all
 * mutation goes through builders that return a new Graph.
 */
class Graph {
 public:
  Graph() : row_offsets_(1, 0) {}

  /// Builds a symmetric graph from undirected edges. Repeated pairs are merged
  /// by summing weights; zero-weight results are dropped.
  static Graph from_edges(std::size_t n, std::span<const Edge> edges,
                          bool allow_self_loops = false);

  std::size_t num_nodes() const { return n_; }
  /// Number of undirected edges (self-loops count once).
  std::size_t num_edges() const;
  bool allows_self_loops() const { return allow_self_loops_; }

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const NodeId> col_indices() const { return col_indices_; }
  std::span<const double> weights() const { return weights_; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {col_indices_.data() + row_offsets_[v],
            row_offsets_[v + 1] - row_offsets_[v]};
  }
  std::span<const double> neighbor_weights(NodeId v) const {
    return {weights_.data() + row_offsets_[v],
            row_offsets_[v + 1] - row_offsets_[v]};
  }

  /// Weighted degree.
  double degree(NodeId v) const;
  std::vector<double> degrees() const;
  /// Sum of all adjacency entries.
  double volume() const;
  /// Weight of (i,j), zero when absent.
  double weight(NodeId i, NodeId j) const;

  /// Undirected edges with src <= dst, in row-major order.
  std::vector<Edge> undirected_edges() const;

  /// Induced subgraph on nodes [0, k).
  Graph prefix(std::size_t k) const;
  /// Induced subgraph on `nodes`; node nodes[i] becomes i.
  Graph induced(std::span<const NodeId> nodes) const;

  SparseMatrix adjacency() const;

  bool operator==(const Graph&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<NodeId> col_indices_;
  std::vector<double> weights_;
  bool allow_self_loops_ = false;
};

struct LoadedGraph {
  Graph graph;
  /// tokens[id] is the original identifier of node id.
  std::vector<std::string> tokens;
  std::unordered_map<std::string, NodeId> ids;
  std::size_t dropped_self_loops = 0;
};

/// Parses "src<TAB>dst[<TAB>weight]" lines ('#' comments, blank lines and
/// space separators accepted). Tokens are remapped to 0..n-1 by first
/// appearance.
LoadedGraph load_edge_list(std::istream& in, bool weighted);
LoadedGraph load_edge_list_file(const std::string& path, bool weighted);

/// Writes an edge list that `load_edge_list` maps back onto identical CSR
/// arrays: the line order reproduces the id assignment. Requires every node to
/// have at least one incident edge.
void write_edge_list(std::ostream& out, const Graph& g,
                     std::span<const std::string> tokens = {});

struct ComponentSubgraph {
  Graph graph;
  /// original_ids[new_id] = id in the source graph, increasing.
  std::vector<NodeId> original_ids;
};

/// Largest connected component; ties go to the component holding the smallest
/// node id. Relative order of retained ids is preserved.
ComponentSubgraph giant_component(const Graph& g);

/// Node -> label sets, label ids dense in [0, label_count).
struct LabelTable {
  std::size_t label_count = 0;
  std::vector<std::vector<std::uint32_t>> assignments;  // sorted, unique
  std::vector<std::string> label_names;

  std::size_t num_nodes() const { return assignments.size(); }
  /// Rows reordered/filtered: result node i holds the labels of nodes[i].
  LabelTable select(std::span<const NodeId> nodes) const;
  void validate() const;
};

/// Parses "node<TAB>label" lines. Node tokens are resolved through `ids`;
/// tokens absent from the graph are skipped. Labels are numbered by first
/// appearance.
LabelTable load_labels(std::istream& in,
                       const std::unordered_map<std::string, NodeId>& ids,
                       std::size_t num_nodes);
LabelTable load_labels_file(const std::string& path,
                            const std::unordered_map<std::string, NodeId>& ids,
                            std::size_t num_nodes);

struct BatchEdge {
  NodeId a = 0;
  NodeId b = 0;
  double weight = 1.0;
};

/// Arrival of `m` nodes onto a graph with `base_n` nodes.
struct StreamBatch {
  std::size_t base_n = 0;
  std::size_t m = 0;
  /// (new local id < m, old id < base_n, w)
  std::vector<BatchEdge> cross_edges;
  /// (new local id, new local id, w)
  std::vector<BatchEdge> intra_edges;
  /// (old id, old id, signed w)
  std::vector<BatchEdge> delta_old_edges;
};

/// Returns the graph after the batch. Negative deltas clamp the weight at zero
/// (dropping the edge); a negative delta on a missing edge is an error.
Graph apply_batch(const Graph& g, const StreamBatch& batch);

struct ArrivalOrder {
  enum class Kind { kFileOrder, kShuffled };
  Kind kind = Kind::kFileOrder;
  std::uint64_t seed = 42;
};

/**
 * A graph split into an initial prefix and an ordered list of node arrivals.
 *
 * Node ids are positional: the initial nodes are 0..n-1 and every batch
 * appends its nodes after the current prefix. `order[p]` is the source-graph
 * id of the node at position p.
 */
struct StreamScenario {
  Graph initial;
  std::vector<StreamBatch> batches;
  LabelTable labels;
  std::vector<NodeId> order;

  std::size_t total_nodes() const { return order.size(); }
  std::size_t arrivals() const;
  /// The graph after replaying every batch.
  Graph replay() const;
};

StreamScenario make_scenario(const Graph& g, std::size_t n,
                             const ArrivalOrder& order, std::size_t batch_size,
                             const LabelTable* labels = nullptr);

}  // namespace sip
