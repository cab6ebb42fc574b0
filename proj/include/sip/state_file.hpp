#pragma once

#include <string>
#include <string_view>

#include "sip/graph.hpp"
#include "sip/projectors.hpp"

namespace sip {

/**
 * Binary basis state:
 *   "SIPSTATE" | version byte | uint64 LE header length | JSON header |
 *   arrays as row-major little-endian float64, in header order.
 *
 * Only the projection basis is stored. The embedding is not, and NetMF
 * degrees are taken from the initial graph when binding.
 */
std::string encode_state(const FitResult& model);
/// Embedding is left empty; NetMF degrees stay empty until bind_graph.
FitResult decode_state(std::string_view bytes);

/// Checks that g0 is the graph the basis was fit on (node count) and
/// restores graph-derived fields.
void bind_graph(FitResult& model, const Graph& g0);

/// Writes under an exclusive advisory lock.
void save_state(const std::string& path, const FitResult& model);
FitResult load_state(const std::string& path);

}  // namespace sip
