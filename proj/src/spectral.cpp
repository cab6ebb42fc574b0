#include "sip/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "sip/error.hpp"

namespace sip {

using Index = Eigen::Index;

LinearOperator make_operator(const SparseMatrix& m) {
  return [&m](const Matrix& x, Matrix& y) { y.noalias() = m * x; };
}

LinearOperator make_transpose_operator(const SparseMatrix& m) {
  return [&m](const Matrix& x, Matrix& y) { y.noalias() = m.transpose() * x; };
}

LinearOperator make_operator(const Matrix& m) {
  return [&m](const Matrix& x, Matrix& y) { y.noalias() = m * x; };
}

LinearOperator make_transpose_operator(const Matrix& m) {
  return [&m](const Matrix& x, Matrix& y) { y.noalias() = m.transpose() * x; };
}

namespace {

class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : gen_(seed) {}
  double operator()() { return dist_(gen_); }
  Matrix block(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
      for (Index i = 0; i < rows; ++i) m(i, j) = (*this)();
    }
    return m;
  }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> dist_;
};

// Larger is more wanted.
double wanted_key(double theta, EigenOrder order) {
  switch (order) {
    case EigenOrder::kDescendingAlgebraic: return theta;
    case EigenOrder::kDescendingMagnitude: return std::abs(theta);
    case EigenOrder::kAscendingMagnitude: return -std::abs(theta);
  }
  return theta;
}

std::vector<Index> ranked(const Vector& theta, EigenOrder order) {
  std::vector<Index> idx(static_cast<std::size_t>(theta.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
    return wanted_key(theta(a), order) > wanted_key(theta(b), order);
  });
  return idx;
}

// Removes the components of `q` along `locked` and the first `k` columns of
// `basis` (two classical Gram-Schmidt passes).
void project_out(Matrix& q, const Matrix* locked, const Matrix& basis, Index k) {
  for (int pass = 0; pass < 2; ++pass) {
    if (locked != nullptr && locked->cols() > 0) {
      q.noalias() -= *locked * (locked->transpose() * q);
    }
    if (k > 0) {
      q.noalias() -= basis.leftCols(k) * (basis.leftCols(k).transpose() * q);
    }
  }
}

/**
 * Orthonormalizes a candidate block against locked vectors, the current basis
 * and itself. Columns that collapse (breakdown) are replaced by random
 * directions. Returns fewer columns when the complement is exhausted.
 */
Matrix orthonormalize_block(Matrix q, const Matrix* locked, const Matrix& basis,
                            Index k, Index n, Gaussian& rng) {
  const Index locked_cols = locked != nullptr ? locked->cols() : 0;
  const Index room = n - locked_cols - k;
  if (room <= 0) return Matrix(n, 0);
  if (q.cols() > room) q.conservativeResize(Eigen::NoChange, room);

  Vector original(q.cols());
  for (Index j = 0; j < q.cols(); ++j) original(j) = q.col(j).norm();
  project_out(q, locked, basis, k);

  Matrix out(n, q.cols());
  Index accepted = 0;
  for (Index j = 0; j < q.cols(); ++j) {
    Vector v = q.col(j);
    double reference = original(j);
    bool ok = false;
    for (int attempt = 0; attempt < 4 && !ok; ++attempt) {
      for (int pass = 0; pass < 2; ++pass) {
        if (accepted > 0) {
          v.noalias() -= out.leftCols(accepted) *
                         (out.leftCols(accepted).transpose() * v);
        }
      }
      const double nrm = v.norm();
      if (nrm > 1e-13 * reference && nrm > 1e-300) {
        out.col(accepted++) = v / nrm;
        ok = true;
        break;
      }
      // Breakdown: restart this column from a random direction.
      Matrix r = rng.block(n, 1);
      reference = r.norm();
      project_out(r, locked, basis, k);
      v = r.col(0);
    }
    if (!ok) break;
  }
  out.conservativeResize(Eigen::NoChange, accepted);
  return out;
}

struct SolveResult {
  Vector values;
  Matrix vectors;
  Vector residuals;
  bool converged = false;
  std::size_t restarts = 0;
};

SolveResult solve_block_lanczos(const LinearOperator& op, Index n, Index d,
                                EigenOrder order, const EigenOptions& opts,
                                const Matrix* locked, std::uint64_t seed) {
  const Index locked_cols = locked != nullptr ? locked->cols() : 0;
  const Index avail = n - locked_cols;
  SolveResult res;
  if (d == 0) {
    res.values.resize(0);
    res.vectors.resize(n, 0);
    res.residuals.resize(0);
    res.converged = true;
    return res;
  }

  Index p = opts.block_size > 0 ? static_cast<Index>(opts.block_size)
                                : std::min<Index>(d, 8);
  p = std::max<Index>(1, std::min(p, avail));
  Index kmax = opts.max_basis > 0 ? static_cast<Index>(opts.max_basis)
                                  : std::max(3 * d, d + 6 * p);
  kmax = std::max(kmax, d + p);
  kmax = std::min(kmax, avail);
  const Index keep = std::max(d, std::min(kmax - p, d + (kmax - d) / 2));
  const std::size_t max_restarts =
      opts.max_restarts > 0 ? opts.max_restarts
                            : std::max<std::size_t>(50, 10 * static_cast<std::size_t>(d));

  Gaussian rng(seed);
  Matrix V(n, kmax);
  Matrix AV(n, kmax);
  Matrix T = Matrix::Zero(kmax, kmax);
  Index k = 0;

  Matrix q = orthonormalize_block(rng.block(n, p), locked, V, 0, n, rng);
  Matrix aq(n, q.cols());

  for (;;) {
    // Grow the search space block by block.
    while (q.cols() > 0) {
      const Index b = q.cols();
      V.middleCols(k, b) = q;
      aq.resize(n, b);
      op(q, aq);
      if (locked != nullptr && locked_cols > 0) {
        aq.noalias() -= *locked * (locked->transpose() * aq);
      }
      AV.middleCols(k, b) = aq;
      const Matrix c = V.leftCols(k + b).transpose() * aq;
      T.block(0, k, k + b, b) = c;
      T.block(k, 0, b, k) = c.topRows(k).transpose();
      k += b;
      if (k + p > kmax || k >= avail) break;
      q = orthonormalize_block(aq, locked, V, k, n, rng);
    }

    Matrix tk = T.topLeftCorner(k, k);
    tk = 0.5 * (tk + tk.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(tk);
    const Vector& theta_all = es.eigenvalues();
    const auto idx = ranked(theta_all, order);
    const Index want = std::min(d, k);

    Matrix s(k, k);
    Vector theta(k);
    for (Index j = 0; j < k; ++j) {
      s.col(j) = es.eigenvectors().col(idx[static_cast<std::size_t>(j)]);
      theta(j) = theta_all(idx[static_cast<std::size_t>(j)]);
    }

    const Matrix y = V.leftCols(k) * s.leftCols(want);
    const Matrix ay = AV.leftCols(k) * s.leftCols(want);
    Vector resid(want);
    for (Index j = 0; j < want; ++j) {
      resid(j) = (ay.col(j) - theta(j) * y.col(j)).norm();
    }
    const double scale = std::max(1.0, std::abs(theta(0)));
    const bool exhausted = k >= avail;
    const bool converged =
        want == d && (exhausted || resid.maxCoeff() <= opts.tol * scale);

    if (converged || res.restarts >= max_restarts) {
      res.values = theta.head(want);
      res.vectors = y;
      res.residuals = resid;
      res.converged = converged;
      return res;
    }

    // Thick restart: keep the best Ritz vectors, continue from the residual
    // direction of the last block.
    Matrix next = orthonormalize_block(aq, locked, V, k, n, rng);
    const Index kept = std::min(keep, k);
    V.leftCols(kept) = (V.leftCols(k) * s.leftCols(kept)).eval();
    AV.leftCols(kept) = (AV.leftCols(k) * s.leftCols(kept)).eval();
    T.setZero();
    T.topLeftCorner(kept, kept) = theta.head(kept).asDiagonal();
    k = kept;
    q = orthonormalize_block(next, locked, V, k, n, rng);
    if (q.cols() == 0) {
      q = orthonormalize_block(rng.block(n, p), locked, V, k, n, rng);
    }
    ++res.restarts;
  }
}

}  // namespace

Matrix random_orthonormal(std::size_t n, std::size_t k, std::uint64_t seed) {
  Gaussian rng(seed);
  Matrix g = rng.block(static_cast<Index>(n), static_cast<Index>(k));
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(static_cast<Index>(n),
                                              static_cast<Index>(k));
}

void canonicalize_signs(Matrix& vectors, Matrix* partner) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < vectors.rows(); ++i) {
      const double a = std::abs(vectors(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (vectors.rows() > 0 && vectors(arg, j) < 0.0) {
      vectors.col(j) *= -1.0;
      if (partner != nullptr) partner->col(j) *= -1.0;
    }
  }
}

namespace {

// Extreme Ritz values from a short Krylov run; used to tell whether the
// smallest-magnitude eigenvalues sit at an end of the spectrum.
std::pair<double, double> spectrum_extremes(const LinearOperator& op, Index n,
                                            std::uint64_t seed) {
  EigenOptions quick;
  quick.block_size = 1;
  quick.max_basis = static_cast<std::size_t>(std::min<Index>(n, 40));
  quick.max_restarts = 1;
  quick.tol = 0.0;
  SolveResult top = solve_block_lanczos(op, n, 1, EigenOrder::kDescendingAlgebraic,
                                        quick, nullptr, seed);
  LinearOperator negated = [&](const Matrix& x, Matrix& y) {
    op(x, y);
    y = -y;
  };
  SolveResult bottom = solve_block_lanczos(
      negated, n, 1, EigenOrder::kDescendingAlgebraic, quick, nullptr, seed);
  return {-bottom.values(0), top.values(0)};
}

SolveResult solve_with_probes(const LinearOperator& op, Index n, Index d,
                              EigenOrder order, const EigenOptions& opts) {
  SolveResult main = solve_block_lanczos(op, n, d, order, opts, nullptr, opts.seed);
  if (!main.converged) {
    std::ostringstream msg;
    msg << "Lanczos did not converge after " << main.restarts
        << " restarts; max residual " << main.residuals.maxCoeff();
    throw Error(ErrorCode::kNotConverged, msg.str());
  }

  // Deflated probe: eigenvalues hidden by multiplicity above the block width
  // show up as better-ranked values in the orthogonal complement.
  const Index p = opts.block_size > 0 ? static_cast<Index>(opts.block_size)
                                      : std::min<Index>(d, 8);
  for (int round = 0; round < 64 && d > 0 && n - d > 0; ++round) {
    const Index probe_count = std::min<Index>(std::max<Index>(p, 1), n - d);
    EigenOptions probe_opts = opts;
    probe_opts.block_size = static_cast<std::size_t>(probe_count);
    probe_opts.max_basis = 0;
    SolveResult probe =
        solve_block_lanczos(op, n, probe_count, order, probe_opts,
                            &main.vectors, opts.seed + 7919u * (round + 1));
    const double scale = std::max(1.0, std::abs(main.values(0)));
    const double worst = wanted_key(main.values(d - 1), order);
    const double margin = 100.0 * opts.tol * scale;
    bool missed = false;
    for (Index j = 0; j < probe.values.size(); ++j) {
      if (wanted_key(probe.values(j), order) > worst + margin) missed = true;
    }
    if (!missed) break;

    Matrix w(n, d + probe.vectors.cols());
    w << main.vectors, probe.vectors;
    Eigen::HouseholderQR<Matrix> qr(w);
    w = qr.householderQ() * Matrix::Identity(n, w.cols());
    Matrix aw(n, w.cols());
    op(w, aw);
    Matrix t = w.transpose() * aw;
    t = 0.5 * (t + t.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(t);
    const auto idx = ranked(es.eigenvalues(), order);
    Matrix s(w.cols(), d);
    Vector theta(d);
    for (Index j = 0; j < d; ++j) {
      s.col(j) = es.eigenvectors().col(idx[static_cast<std::size_t>(j)]);
      theta(j) = es.eigenvalues()(idx[static_cast<std::size_t>(j)]);
    }
    main.vectors = w * s;
    const Matrix ay = aw * s;
    main.values = theta;
    for (Index j = 0; j < d; ++j) {
      main.residuals(j) = (ay.col(j) - theta(j) * main.vectors.col(j)).norm();
    }
  }
  return main;
}

}  // namespace

EigenPairs lanczos_eig(const LinearOperator& op, std::size_t n, std::size_t d,
                       EigenOrder order, const EigenOptions& opts) {
  if (d > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "requested " + std::to_string(d) + " eigenpairs of a " +
                    std::to_string(n) + "-dimensional operator");
  }
  const Index nn = static_cast<Index>(n);
  const Index dd = static_cast<Index>(d);

  bool folded = false;
  if (order == EigenOrder::kAscendingMagnitude && dd > 0 && nn > dd) {
    const auto [lo, hi] = spectrum_extremes(op, nn, opts.seed ^ 0x9e3779b97f4a7c15ULL);
    const double spread = std::max({std::abs(lo), std::abs(hi), 1e-300});
    folded = lo < -1e-3 * spread && hi > 1e-3 * spread;
  }

  EigenPairs out;
  out.order = order;
  if (!folded) {
    SolveResult r = solve_with_probes(op, nn, dd, order, opts);
    out.values = r.values;
    out.vectors = std::move(r.vectors);
    out.residuals = r.residuals;
  } else {
    // Indefinite operator: the smallest |lambda| are interior, but they are
    // the lower end of M^2. Solve there, then Rayleigh-Ritz with M.
    LinearOperator square = [&](const Matrix& x, Matrix& y) {
      Matrix tmp(x.rows(), x.cols());
      op(x, tmp);
      op(tmp, y);
    };
    // Gaps at the low end of M^2 are squared, so the default search space
    // is too narrow there.
    EigenOptions wide = opts;
    if (wide.max_basis == 0) {
      wide.max_basis = static_cast<std::size_t>(std::min<Index>(nn, std::max<Index>(10 * dd, 80)));
    }
    SolveResult r = solve_with_probes(square, nn, dd, order, wide);
    Matrix ax(nn, dd);
    op(r.vectors, ax);
    Matrix t = r.vectors.transpose() * ax;
    t = 0.5 * (t + t.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(t);
    const auto idx = ranked(es.eigenvalues(), order);
    Matrix s(dd, dd);
    out.values.resize(dd);
    for (Index j = 0; j < dd; ++j) {
      s.col(j) = es.eigenvectors().col(idx[static_cast<std::size_t>(j)]);
      out.values(j) = es.eigenvalues()(idx[static_cast<std::size_t>(j)]);
    }
    out.vectors = r.vectors * s;
    const Matrix ay = ax * s;
    out.residuals.resize(dd);
    for (Index j = 0; j < dd; ++j) {
      out.residuals(j) = (ay.col(j) - out.values(j) * out.vectors.col(j)).norm();
    }
  }
  canonicalize_signs(out.vectors);
  return out;
}

SvdTriplet truncated_svd(const LinearOperator& op, const LinearOperator& op_t,
                         std::size_t rows, std::size_t cols, std::size_t d,
                         const EigenOptions& opts) {
  if (d > std::min(rows, cols)) {
    throw Error(ErrorCode::kInvalidArgument,
                "rank " + std::to_string(d) + " exceeds min dimension of " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  const Index r = static_cast<Index>(rows);
  const Index c = static_cast<Index>(cols);
  const Index dd = static_cast<Index>(d);
  SvdTriplet out;
  if (d == 0) {
    out.U.resize(r, 0);
    out.V.resize(c, 0);
    out.sigma.resize(0);
    return out;
  }

  const bool right_side = c <= r;
  const Index small = right_side ? c : r;
  const Index large = right_side ? r : c;
  const LinearOperator& first = right_side ? op : op_t;
  const LinearOperator& second = right_side ? op_t : op;
  LinearOperator gram = [&](const Matrix& x, Matrix& y) {
    Matrix tmp(large, x.cols());
    first(x, tmp);
    second(tmp, y);
  };
  EigenOptions gram_opts = opts;
  gram_opts.tol = opts.tol * 0.1;
  EigenPairs eig = lanczos_eig(gram, static_cast<std::size_t>(small), d,
                               EigenOrder::kDescendingAlgebraic, gram_opts);

  // Rayleigh-Ritz on the triplets: B = M V = Q R, R = Ub S Wbᵀ.
  Matrix b(large, dd);
  first(eig.vectors, b);
  Eigen::HouseholderQR<Matrix> qr(b);
  const Matrix q = qr.householderQ() * Matrix::Identity(large, dd);
  const Matrix rr = qr.matrixQR().topRows(dd).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> svd(rr, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix big = q * svd.matrixU();
  Matrix other = eig.vectors * svd.matrixV();
  out.sigma = svd.singularValues();
  if (right_side) {
    out.U = std::move(big);
    out.V = std::move(other);
  } else {
    out.V = std::move(big);
    out.U = std::move(other);
  }
  canonicalize_signs(out.U, &out.V);
  return out;
}

NormEstimate spectral_norm(const LinearOperator& op, const LinearOperator& op_t,
                           std::size_t rows, std::size_t cols,
                           const NormOptions& opts) {
  NormEstimate est;
  if (rows == 0 || cols == 0) return est;
  const bool right_side = cols <= rows;
  const Index small = static_cast<Index>(right_side ? cols : rows);
  const Index large = static_cast<Index>(right_side ? rows : cols);
  const LinearOperator& first = right_side ? op : op_t;
  const LinearOperator& second = right_side ? op_t : op;

  Gaussian rng(opts.seed);
  Matrix x = rng.block(small, 1);
  x /= x.norm();
  Matrix tmp(large, 1);
  Matrix y(small, 1);
  double theta = 0.0;
  double resid = 0.0;
  est.converged = false;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    first(x, tmp);
    second(tmp, y);
    est.iterations = it;
    theta = x.col(0).dot(y.col(0));
    const double ynorm = y.norm();
    if (ynorm == 0.0 || theta <= 0.0) {
      // The Gram operator annihilates x; for a random start that means the
      // operator is zero.
      theta = std::max(theta, 0.0);
      resid = ynorm;
      est.converged = ynorm == 0.0;
      break;
    }
    resid = (y - theta * x).norm();
    if (resid <= opts.tol * theta) {
      est.converged = true;
      break;
    }
    x = y / ynorm;
  }
  est.value = std::sqrt(theta);
  // |lambda - theta| <= resid for some Gram eigenvalue lambda.
  est.error_bound = est.value > 0.0 ? resid / est.value : std::sqrt(resid);
  return est;
}

NormEstimate spectral_norm(const SparseMatrix& m, const NormOptions& opts) {
  return spectral_norm(make_operator(m), make_transpose_operator(m),
                       static_cast<std::size_t>(m.rows()),
                       static_cast<std::size_t>(m.cols()), opts);
}

PrefixCorrelation prefix_correlation(const Matrix& before, const Matrix& after) {
  if (before.cols() != after.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "column counts differ");
  }
  const Index n = before.rows();
  if (after.rows() < n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "updated matrix has fewer rows than the original");
  }
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "correlation needs at least two rows");
  }
  PrefixCorrelation out;
  out.values.resize(static_cast<std::size_t>(before.cols()));
  out.degenerate.resize(static_cast<std::size_t>(before.cols()));
  for (Index j = 0; j < before.cols(); ++j) {
    const Vector a = before.col(j).array() - before.col(j).mean();
    const Vector b = after.col(j).head(n).array() - after.col(j).head(n).mean();
    const double na = a.norm();
    const double nb = b.norm();
    const auto jj = static_cast<std::size_t>(j);
    if (na == 0.0 || nb == 0.0) {
      out.values[jj] = 0.0;
      out.degenerate[jj] = true;
    } else {
      out.values[jj] = std::min(1.0, std::abs(a.dot(b)) / (na * nb));
      out.degenerate[jj] = false;
    }
  }
  return out;
}

}  // namespace sip
