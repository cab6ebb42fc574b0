#include "sip/synthetic.hpp"

#include <random>
#include <string>
#include <vector>

#include "sip/error.hpp"

namespace sip {

LabeledGraph planted_partition(std::size_t n, std::size_t communities, double p_in, double p_out,
                               std::uint64_t seed, double second_label) {
  if (communities == 0 || communities > n) {
    throw Error(ErrorCode::kInvalidArgument, "need 1 <= communities <= n");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = i % communities == j % communities ? p_in : p_out;
      if (unit(rng) < p) edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j), 1.0});
    }
  }
  LabeledGraph out{Graph::from_edges(n, edges), {}};
  out.labels.label_count = communities;
  for (std::size_t c = 0; c < communities; ++c) out.labels.label_names.push_back(std::to_string(c));
  out.labels.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = out.labels.assignments[i];
    const auto c = static_cast<std::uint32_t>(i % communities);
    a.push_back(c);
    if (communities > 1 && unit(rng) < second_label) {
      a.push_back(static_cast<std::uint32_t>((c + 1) % communities));
      if (a[0] > a[1]) std::swap(a[0], a[1]);
    }
  }
  return out;
}

Graph ring_with_chords(std::size_t n, double mean_degree, std::uint64_t seed) {
  if (n < 3 || mean_degree < 2.0) {
    throw Error(ErrorCode::kInvalidArgument, "need n >= 3 and mean degree >= 2");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    edges.push_back({static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % n), 1.0});
  }
  const auto chords = static_cast<std::size_t>((mean_degree - 2.0) * static_cast<double>(n) / 2.0);
  while (edges.size() < n + chords) {
    const std::size_t u = pick(rng), v = pick(rng);
    if (u != v) edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v), 1.0});
  }
  return Graph::from_edges(n, edges);
}

}  // namespace sip
