#include "sip/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "sip/error.hpp"

namespace sip {

namespace {

struct Triplet {
  NodeId row;
  NodeId col;
  double weight;
};

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r' || line[i] == ',')) {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' &&
           line[j] != '\r' && line[j] != ',') {
      ++j;
    }
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view strip_comment(std::string_view line) {
  auto hash = line.find('#');
  if (hash != std::string_view::npos) line = line.substr(0, hash);
  return line;
}

}  // namespace

Graph Graph::from_edges(std::size_t n, std::span<const Edge> edges,
                        bool allow_self_loops) {
  std::vector<Triplet> entries;
  entries.reserve(2 * edges.size());
  for (const Edge& e : edges) {
    if (e.src >= n || e.dst >= n) {
      throw Error(ErrorCode::kOutOfRange,
                  "edge (" + std::to_string(e.src) + "," +
                      std::to_string(e.dst) + ") outside node range " +
                      std::to_string(n));
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "edge weights must be finite and non-negative");
    }
    if (e.src == e.dst) {
      if (!allow_self_loops) {
        throw Error(ErrorCode::kInvalidArgument,
                    "self-loop on node " + std::to_string(e.src));
      }
      entries.push_back({e.src, e.dst, e.weight});
      continue;
    }
    entries.push_back({e.src, e.dst, e.weight});
    entries.push_back({e.dst, e.src, e.weight});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Triplet& a, const Triplet& b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });

  Graph g;
  g.n_ = n;
  g.allow_self_loops_ = allow_self_loops;
  g.row_offsets_.assign(n + 1, 0);
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i;
    double w = 0.0;
    while (j < entries.size() && entries[j].row == entries[i].row &&
           entries[j].col == entries[i].col) {
      w += entries[j].weight;
      ++j;
    }
    if (w > 0.0) {
      g.col_indices_.push_back(entries[i].col);
      g.weights_.push_back(w);
      ++g.row_offsets_[entries[i].row + 1];
    }
    i = j;
  }
  std::partial_sum(g.row_offsets_.begin(), g.row_offsets_.end(),
                   g.row_offsets_.begin());
  return g;
}

std::size_t Graph::num_edges() const {
  std::size_t loops = 0;
  for (NodeId v = 0; v < n_; ++v) {
    for (NodeId u : neighbors(v)) loops += (u == v);
  }
  return (col_indices_.size() - loops) / 2 + loops;
}

double Graph::degree(NodeId v) const {
  double s = 0.0;
  for (double w : neighbor_weights(v)) s += w;
  return s;
}

std::vector<double> Graph::degrees() const {
  std::vector<double> d(n_);
  for (NodeId v = 0; v < n_; ++v) d[v] = degree(v);
  return d;
}

double Graph::volume() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

double Graph::weight(NodeId i, NodeId j) const {
  auto nbrs = neighbors(i);
  auto it = std::lower_bound(nbrs.begin(), nbrs.end(), j);
  if (it == nbrs.end() || *it != j) return 0.0;
  return weights_[row_offsets_[i] + (it - nbrs.begin())];
}

std::vector<Edge> Graph::undirected_edges() const {
  std::vector<Edge> out;
  out.reserve(col_indices_.size() / 2 + 1);
  for (NodeId v = 0; v < n_; ++v) {
    auto nbrs = neighbors(v);
    auto ws = neighbor_weights(v);
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      if (nbrs[k] >= v) out.push_back({v, nbrs[k], ws[k]});
    }
  }
  return out;
}

Graph Graph::prefix(std::size_t k) const {
  if (k > n_) {
    throw Error(ErrorCode::kOutOfRange, "prefix larger than graph");
  }
  Graph g;
  g.n_ = k;
  g.allow_self_loops_ = allow_self_loops_;
  g.row_offsets_.assign(k + 1, 0);
  for (NodeId v = 0; v < k; ++v) {
    auto nbrs = neighbors(v);
    auto ws = neighbor_weights(v);
    for (std::size_t e = 0; e < nbrs.size() && nbrs[e] < k; ++e) {
      g.col_indices_.push_back(nbrs[e]);
      g.weights_.push_back(ws[e]);
    }
    g.row_offsets_[v + 1] = g.col_indices_.size();
  }
  return g;
}

Graph Graph::induced(std::span<const NodeId> nodes) const {
  constexpr NodeId kAbsent = std::numeric_limits<NodeId>::max();
  std::vector<NodeId> remap(n_, kAbsent);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] >= n_) throw Error(ErrorCode::kOutOfRange, "node id");
    remap[nodes[i]] = i;
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto nbrs = neighbors(nodes[i]);
    auto ws = neighbor_weights(nodes[i]);
    for (std::size_t e = 0; e < nbrs.size(); ++e) {
      NodeId j = remap[nbrs[e]];
      if (j != kAbsent && j >= i) edges.push_back({i, j, ws[e]});
    }
  }
  return from_edges(nodes.size(), edges, allow_self_loops_);
}

SparseMatrix Graph::adjacency() const {
  const auto n = static_cast<Eigen::Index>(n_);
  SparseMatrix a(n, n);
  a.resizeNonZeros(static_cast<Eigen::Index>(col_indices_.size()));
  std::copy(weights_.begin(), weights_.end(), a.valuePtr());
  for (std::size_t k = 0; k < col_indices_.size(); ++k) {
    a.innerIndexPtr()[k] = static_cast<SparseMatrix::StorageIndex>(col_indices_[k]);
  }
  for (std::size_t v = 0; v <= n_; ++v) {
    a.outerIndexPtr()[v] = static_cast<SparseMatrix::StorageIndex>(row_offsets_[v]);
  }
  return a;
}

LoadedGraph load_edge_list(std::istream& in, bool weighted) {
  LoadedGraph out;
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  auto intern = [&](std::string_view tok) {
    auto [it, inserted] = out.ids.emplace(std::string(tok), out.tokens.size());
    if (inserted) out.tokens.emplace_back(tok);
    return it->second;
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(strip_comment(line));
    if (fields.empty()) continue;
    if (fields.size() < 2 || fields.size() > 3) {
      throw Error(ErrorCode::kParse,
                  "line " + std::to_string(line_no) +
                      ": expected 'src dst [weight]'");
    }
    double w = 1.0;
    if (fields.size() == 3 && weighted) {
      if (!parse_double(fields[2], w) || !std::isfinite(w)) {
        throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                           ": bad weight '" +
                                           std::string(fields[2]) + "'");
      }
      if (w < 0.0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "line " + std::to_string(line_no) + ": negative weight");
      }
    }
    NodeId a = intern(fields[0]);
    NodeId b = intern(fields[1]);
    if (a == b) {
      ++out.dropped_self_loops;
      continue;
    }
    edges.push_back({a, b, w});
  }
  out.graph = Graph::from_edges(out.tokens.size(), edges);
  return out;
}

LoadedGraph load_edge_list_file(const std::string& path, bool weighted) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return load_edge_list(in, weighted);
}

void write_edge_list(std::ostream& out, const Graph& g,
                     std::span<const std::string> tokens) {
  const std::size_t n = g.num_nodes();
  auto name = [&](NodeId v) {
    return tokens.empty() ? std::to_string(v) : tokens[v];
  };
  auto emit = [&](NodeId a, NodeId b, double w) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), w);
    out << name(a) << '\t' << name(b) << '\t'
        << std::string_view(buf, res.ptr - buf) << '\n';
  };

  // First pass: one line per node introducing it in id order; every node's
  // first appearance in a loaded file pairs it with an earlier node or with
  // its successor.
  std::vector<bool> seen(n, false);
  std::vector<Edge> introduced;
  for (NodeId v = 0; v < n; ++v) {
    if (seen[v]) continue;
    auto nbrs = g.neighbors(v);
    auto ws = g.neighbor_weights(v);
    if (nbrs.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "isolated node " + std::to_string(v) +
                      " cannot be written to an edge list");
    }
    std::size_t pick = nbrs.size();
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      if (nbrs[k] < v) {
        pick = k;
        break;
      }
    }
    if (pick == nbrs.size()) {
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        if (nbrs[k] == v + 1) pick = k;
      }
    }
    if (pick == nbrs.size()) pick = 0;
    emit(v, nbrs[pick], ws[pick]);
    seen[v] = true;
    seen[nbrs[pick]] = true;
    introduced.push_back({std::min(v, nbrs[pick]), std::max(v, nbrs[pick]), 0});
  }
  std::sort(introduced.begin(), introduced.end(),
            [](const Edge& a, const Edge& b) {
              return a.src != b.src ? a.src < b.src : a.dst < b.dst;
            });
  for (const Edge& e : g.undirected_edges()) {
    if (e.src == e.dst) continue;
    bool done = std::binary_search(
        introduced.begin(), introduced.end(), e,
        [](const Edge& a, const Edge& b) {
          return a.src != b.src ? a.src < b.src : a.dst < b.dst;
        });
    if (!done) emit(e.src, e.dst, e.weight);
  }
}

ComponentSubgraph giant_component(const Graph& g) {
  const std::size_t n = g.num_nodes();
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> comp(n, kUnset);
  std::vector<std::size_t> sizes;
  std::vector<NodeId> stack;
  for (NodeId s = 0; s < n; ++s) {
    if (comp[s] != kUnset) continue;
    const std::size_t c = sizes.size();
    sizes.push_back(0);
    comp[s] = c;
    stack.push_back(s);
    while (!stack.empty()) {
      NodeId v = stack.back();
      stack.pop_back();
      ++sizes[c];
      for (NodeId u : g.neighbors(v)) {
        if (comp[u] == kUnset) {
          comp[u] = c;
          stack.push_back(u);
        }
      }
    }
  }
  ComponentSubgraph out;
  if (n == 0) return out;
  // Components are discovered in order of their smallest id, so the first
  // maximum wins ties.
  std::size_t best = 0;
  for (std::size_t c = 1; c < sizes.size(); ++c) {
    if (sizes[c] > sizes[best]) best = c;
  }
  for (NodeId v = 0; v < n; ++v) {
    if (comp[v] == best) out.original_ids.push_back(v);
  }
  out.graph = g.induced(out.original_ids);
  return out;
}

LabelTable LabelTable::select(std::span<const NodeId> nodes) const {
  LabelTable out;
  out.label_count = label_count;
  out.label_names = label_names;
  out.assignments.reserve(nodes.size());
  for (NodeId v : nodes) {
    if (v >= assignments.size()) {
      throw Error(ErrorCode::kOutOfRange, "label row " + std::to_string(v));
    }
    out.assignments.push_back(assignments[v]);
  }
  return out;
}

void LabelTable::validate() const {
  for (const auto& labels : assignments) {
    for (auto l : labels) {
      if (l >= label_count) {
        throw Error(ErrorCode::kOutOfRange, "label id outside [0, L)");
      }
    }
  }
}

LabelTable load_labels(std::istream& in,
                       const std::unordered_map<std::string, NodeId>& ids,
                       std::size_t num_nodes) {
  LabelTable out;
  out.assignments.resize(num_nodes);
  std::unordered_map<std::string, std::uint32_t> label_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(strip_comment(line));
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": expected 'node label'");
    }
    auto node = ids.find(std::string(fields[0]));
    auto [lit, inserted] = label_ids.emplace(
        std::string(fields[1]), static_cast<std::uint32_t>(label_ids.size()));
    if (inserted) out.label_names.emplace_back(fields[1]);
    if (node == ids.end() || node->second >= num_nodes) continue;
    out.assignments[node->second].push_back(lit->second);
  }
  out.label_count = label_ids.size();
  for (auto& labels : out.assignments) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  }
  return out;
}

LabelTable load_labels_file(const std::string& path,
                            const std::unordered_map<std::string, NodeId>& ids,
                            std::size_t num_nodes) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return load_labels(in, ids, num_nodes);
}

Graph apply_batch(const Graph& g, const StreamBatch& b) {
  if (b.base_n != g.num_nodes()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "batch base_n " + std::to_string(b.base_n) +
                    " does not match graph size " +
                    std::to_string(g.num_nodes()));
  }
  const std::size_t n = g.num_nodes();
  std::vector<Edge> edges = g.undirected_edges();

  if (!b.delta_old_edges.empty()) {
    // Accumulate deltas per old pair, then clamp against the current weight.
    std::vector<Edge> deltas;
    for (const BatchEdge& e : b.delta_old_edges) {
      if (e.a >= n || e.b >= n) {
        throw Error(ErrorCode::kOutOfRange, "delta edge outside old nodes");
      }
      deltas.push_back({std::min(e.a, e.b), std::max(e.a, e.b), e.weight});
    }
    auto less = [](const Edge& x, const Edge& y) {
      return x.src != y.src ? x.src < y.src : x.dst < y.dst;
    };
    std::sort(deltas.begin(), deltas.end(), less);
    std::vector<Edge> merged;
    for (const Edge& d : deltas) {
      if (!merged.empty() && merged.back().src == d.src &&
          merged.back().dst == d.dst) {
        merged.back().weight += d.weight;
      } else {
        merged.push_back(d);
      }
    }
    for (const Edge& d : merged) {
      auto it = std::lower_bound(edges.begin(), edges.end(), d, less);
      const bool exists =
          it != edges.end() && it->src == d.src && it->dst == d.dst;
      if (!exists) {
        if (d.weight < 0.0) {
          throw Error(ErrorCode::kInvalidArgument,
                      "removal of nonexistent edge (" + std::to_string(d.src) +
                          "," + std::to_string(d.dst) + ")");
        }
        edges.insert(it, d);
      } else {
        it->weight = std::max(0.0, it->weight + d.weight);
      }
    }
  }

  for (const BatchEdge& e : b.cross_edges) {
    if (e.a >= b.m || e.b >= n) {
      throw Error(ErrorCode::kOutOfRange, "cross edge index out of range");
    }
    edges.push_back({n + e.a, e.b, e.weight});
  }
  for (const BatchEdge& e : b.intra_edges) {
    if (e.a >= b.m || e.b >= b.m) {
      throw Error(ErrorCode::kOutOfRange, "intra edge index out of range");
    }
    edges.push_back({n + e.a, n + e.b, e.weight});
  }
  return Graph::from_edges(n + b.m, edges, g.allows_self_loops());
}

std::size_t StreamScenario::arrivals() const {
  std::size_t m = 0;
  for (const auto& b : batches) m += b.m;
  return m;
}

Graph StreamScenario::replay() const {
  Graph g = initial;
  for (const auto& b : batches) g = apply_batch(g, b);
  return g;
}

StreamScenario make_scenario(const Graph& g, std::size_t n,
                             const ArrivalOrder& order, std::size_t batch_size,
                             const LabelTable* labels) {
  const std::size_t total = g.num_nodes();
  if (n > total) {
    throw Error(ErrorCode::kInvalidArgument,
                "initial size " + std::to_string(n) + " exceeds graph size " +
                    std::to_string(total));
  }
  if (batch_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  }
  StreamScenario s;
  s.order.resize(total);
  std::iota(s.order.begin(), s.order.end(), NodeId{0});
  if (order.kind == ArrivalOrder::Kind::kShuffled) {
    std::mt19937_64 rng(order.seed);
    std::shuffle(s.order.begin(), s.order.end(), rng);
  }
  const Graph ordered = g.induced(s.order);
  s.initial = ordered.prefix(n);
  if (labels != nullptr) s.labels = labels->select(s.order);

  for (std::size_t start = n; start < total; start += batch_size) {
    StreamBatch b;
    b.base_n = start;
    b.m = std::min(batch_size, total - start);
    for (NodeId v = start; v < start + b.m; ++v) {
      auto nbrs = ordered.neighbors(v);
      auto ws = ordered.neighbor_weights(v);
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        const NodeId u = nbrs[k];
        if (u < start) {
          b.cross_edges.push_back({v - start, u, ws[k]});
        } else if (u < start + b.m && u > v) {
          b.intra_edges.push_back({v - start, u - start, ws[k]});
        }
        // u beyond this batch: carried by the batch in which u arrives.
      }
    }
    s.batches.push_back(std::move(b));
  }
  return s;
}

}  // namespace sip
