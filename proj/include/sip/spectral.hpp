#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sip/graph.hpp"

namespace sip {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Block linear operator: writes op(x) into y. `y` arrives sized correctly.
using LinearOperator = std::function<void(const Matrix& x, Matrix& y)>;

LinearOperator make_operator(const SparseMatrix& m);
LinearOperator make_transpose_operator(const SparseMatrix& m);
LinearOperator make_operator(const Matrix& m);
LinearOperator make_transpose_operator(const Matrix& m);

enum class EigenOrder {
  kDescendingAlgebraic,
  kDescendingMagnitude,
  kAscendingMagnitude,
};

struct EigenOptions {
  /// Residual target relative to max(1, |lambda_1|).
  double tol = 1e-8;
  /// Restart cycles; 0 means 10*d (at least 50).
  std::size_t max_restarts = 0;
  std::uint64_t seed = 42;
  /// Block width; 0 picks min(d, 8).
  std::size_t block_size = 0;
  /// Search-space cap; 0 picks max(3d, d + 6*block).
  std::size_t max_basis = 0;
};

struct EigenPairs {
  Vector values;
  Matrix vectors;  // n x d, orthonormal columns
  EigenOrder order = EigenOrder::kDescendingAlgebraic;
  Vector residuals;

  std::size_t rank() const { return static_cast<std::size_t>(values.size()); }
};

/**
 * Truncated eigendecomposition of a symmetric operator by block Lanczos with
 * full reorthogonalization and thick restart.
 *
 * Breakdown (an invariant Krylov block) is handled by continuing from fresh
 * random directions. After convergence a deflated search is run against the
 * accepted vectors to pick up eigenvalues of multiplicity above the block
 * width. Deterministic for a fixed seed.
 */
EigenPairs lanczos_eig(const LinearOperator& op, std::size_t n, std::size_t d,
                       EigenOrder order, const EigenOptions& opts = {});

struct SvdTriplet {
  Matrix U;      // rows x d
  Vector sigma;  // descending, non-negative
  Matrix V;      // cols x d

  std::size_t rank() const { return static_cast<std::size_t>(sigma.size()); }
};

/// Top-d singular triplets of a rows x cols operator (Lanczos on the smaller
/// Gram operator, then a Rayleigh-Ritz refinement of the triplets).
SvdTriplet truncated_svd(const LinearOperator& op, const LinearOperator& op_t,
                         std::size_t rows, std::size_t cols, std::size_t d,
                         const EigenOptions& opts = {});

struct NormOptions {
  double tol = 1e-6;
  std::size_t max_iter = 20000;
  std::uint64_t seed = 42;
};

struct NormEstimate {
  double value = 0.0;
  /// Distance from `value` to the nearest true singular value is at most this.
  double error_bound = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
};

/// Largest singular value by power iteration on the smaller Gram operator.
NormEstimate spectral_norm(const LinearOperator& op, const LinearOperator& op_t,
                           std::size_t rows, std::size_t cols,
                           const NormOptions& opts = {});
NormEstimate spectral_norm(const SparseMatrix& m, const NormOptions& opts = {});

struct PrefixCorrelation {
  std::vector<double> values;
  /// True where a column was constant and the correlation was set to 0.
  std::vector<bool> degenerate;
};

/// |Pearson r| between each column of `before` and the first rows of the
/// matching column of `after`.
PrefixCorrelation prefix_correlation(const Matrix& before, const Matrix& after);

/// Flips each column so that its largest-magnitude entry is positive; the same
/// flips are applied to `partner` when given.
void canonicalize_signs(Matrix& vectors, Matrix* partner = nullptr);

/// Column-orthonormal n x k matrix from a seeded Gaussian draw.
Matrix random_orthonormal(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace sip
