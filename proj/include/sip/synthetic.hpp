#pragma once

#include <cstddef>
#include <cstdint>

#include "sip/graph.hpp"

namespace sip {

struct LabeledGraph {
  Graph graph;
  LabelTable labels;
};

/// Stochastic block model: node i belongs to community i % communities and
/// links to same-community nodes with p_in, others with p_out. With
/// probability second_label a node also carries the next community's label.
LabeledGraph planted_partition(std::size_t n, std::size_t communities, double p_in, double p_out,
                               std::uint64_t seed, double second_label = 0.0);

/// A ring plus uniformly random chords, for a connected graph with the given
/// mean degree (at least 2).
Graph ring_with_chords(std::size_t n, double mean_degree, std::uint64_t seed);

}  // namespace sip
