#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "sip/drift.hpp"
#include "sip/graph.hpp"
#include "sip/spectral.hpp"
#include "sip/targets.hpp"

namespace sip {

struct LEBasis {
  Matrix U;              // n x d
  Vector lambda;         // raw eigenvalues, ascending magnitude
  Vector sigma_clamped;  // lambda with entries below 0.1 replaced by 1
};

struct AROPEBasis {
  Matrix V;      // n x d, eigenvectors with the eigenvalue sign folded in
  Vector sigma;  // |lambda|, descending
};

struct GraRepBasis {
  std::vector<Matrix> V;      // one n x (d/k) factor per order
  std::vector<Vector> sigma;  // matching singular values
  double beta = 0.0;
};

struct NetMFBasis {
  Matrix U_h;
  Vector lambda_h;
  Matrix V;  // n x d right singular vectors of the log matrix
  Vector sigma;
  double vol = 0.0;
  std::size_t window = 1;
  double negative = 1.0;
  std::vector<double> degrees;
};

using MethodBasis = std::variant<LEBasis, AROPEBasis, GraRepBasis, NetMFBasis>;

struct FitResult {
  TargetSpec spec;  // as requested; beta is resolved through `basis`
  std::size_t n = 0;
  Matrix embedding;  // n x d
  MethodBasis basis;
  DriftSpectrum spectrum;
};

FitResult fit(const Graph& g, const TargetSpec& spec);

/// Eigenvalue clamp used before inverting the LE spectrum.
constexpr double kLEClampBelow = 0.1;

/// Number of separately projected blocks: k for GraRep, 1 otherwise.
std::size_t part_count(const MethodBasis& basis);

/// rows (r x n) times the basis inverse factor of one part.
Matrix project_rows(const MethodBasis& basis, std::size_t part, const SparseMatrix& rows);
Matrix project_rows(const MethodBasis& basis, std::size_t part, const Matrix& rows);

/// Target rows of g1 nodes [begin, end) restricted to the first n columns,
/// one matrix per part.
std::vector<Matrix> new_target_rows(const FitResult& model, const Graph& g1,
                                    std::size_t begin, std::size_t end);

/// Projected embeddings of g1 nodes [begin, end) against the fixed basis.
Matrix project_nodes(const FitResult& model, const Graph& g1, std::size_t begin,
                     std::size_t end);

struct GenerateResult {
  Matrix embedding;  // m x d
  std::optional<DriftVerdict> verdict;
  bool retrained = false;
  /// Fit on g1 when retrained; callers swap it in as the new basis.
  std::optional<FitResult> refit;
};

/// Embeds nodes n..N-1 of g1. With `check`, the drift condition between the
/// targets of g0 and g1 decides whether to project or retrain on g1.
GenerateResult generate(const FitResult& model, const Graph& g0, const Graph& g1,
                        bool check, const NormOptions& norm_opts = {});
/// Pure node arrival: g0 is the first n nodes of g1.
GenerateResult generate(const FitResult& model, const Graph& g1, bool check,
                        const NormOptions& norm_opts = {});

}  // namespace sip
