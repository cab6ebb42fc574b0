#include "sip/targets.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sip/error.hpp"

namespace sip {

namespace {

using Index = Eigen::Index;

void check_degrees(const std::vector<double>& deg, bool allow_isolated) {
  if (allow_isolated) return;
  for (std::size_t i = 0; i < deg.size(); ++i) {
    if (deg[i] <= 0.0) {
      throw Error(ErrorCode::kZeroDegree,
                  "node " + std::to_string(i) + " has zero degree");
    }
  }
}

/// D^{-1/2} A D^{-1/2}, with 1/sqrt(d_i d_j) computed as one product so the
/// result is bitwise symmetric.
SparseMatrix degree_normalized(const Graph& g, const std::vector<double>& deg) {
  const Index n = static_cast<Index>(g.num_nodes());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(g.col_indices().size());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    auto nb = g.neighbors(i);
    auto ws = g.neighbor_weights(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const double dd = deg[i] * deg[nb[k]];
      if (dd > 0.0) t.emplace_back(i, nb[k], ws[k] / std::sqrt(dd));
    }
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseMatrix transition_matrix(const Graph& g, const std::vector<double>& deg) {
  const Index n = static_cast<Index>(g.num_nodes());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(g.col_indices().size());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    if (deg[i] <= 0.0) continue;
    auto nb = g.neighbors(i);
    auto ws = g.neighbor_weights(i);
    for (std::size_t k = 0; k < nb.size(); ++k) t.emplace_back(i, nb[k], ws[k] / deg[i]);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

void check_row_range(std::size_t begin, std::size_t end, std::size_t n) {
  if (begin > end || end > n) {
    throw Error(ErrorCode::kOutOfRange, "row range [" + std::to_string(begin) + ", " +
                                            std::to_string(end) + ") outside " +
                                            std::to_string(n));
  }
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kLE: return "le";
    case Method::kAROPE: return "arope";
    case Method::kGraRep: return "grarep";
    case Method::kNetMF: return "netmf";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "le") return Method::kLE;
  if (name == "arope") return Method::kAROPE;
  if (name == "grarep") return Method::kGraRep;
  if (name == "netmf") return Method::kNetMF;
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + name + "'");
}

void TargetSpec::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidArgument, msg);
  };
  if (d < 1) fail("dimension must be at least 1");
  if (arope_weights.empty()) fail("AROPE needs at least one weight");
  for (double w : arope_weights) {
    if (!std::isfinite(w)) fail("AROPE weights must be finite");
  }
  if (grarep_order < 1) fail("GraRep order must be at least 1");
  if (!(grarep_beta >= 0.0) || !std::isfinite(grarep_beta)) fail("GraRep beta must be positive");
  if (method == Method::kGraRep && d % grarep_order != 0) {
    fail("dimension " + std::to_string(d) + " is not divisible by GraRep order " +
         std::to_string(grarep_order));
  }
  if (netmf_rank < d) fail("NetMF rank must be at least the dimension");
  if (netmf_window < 1) fail("NetMF window must be at least 1");
  if (!(netmf_negative >= 1.0)) fail("NetMF negative sample count must be at least 1");
}

LinearOperator Target::op() const {
  return [this](const Matrix& x, Matrix& y) { apply(x, y); };
}

LinearOperator Target::op_transpose() const {
  return [this](const Matrix& x, Matrix& y) { apply_transpose(x, y); };
}

SparseMatrix Target::materialize() const {
  SparseMatrix m = rows(0, size());
  if (symmetric()) {
    SparseMatrix t = m.transpose();
    m = (m + t) * 0.5;
  }
  return m;
}

SparseTarget::SparseTarget(SparseMatrix m, bool symmetric)
    : m_(std::move(m)), symmetric_(symmetric) {
  if (m_.rows() != m_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "target matrix must be square");
  }
  m_.makeCompressed();
}

void SparseTarget::apply(const Matrix& x, Matrix& y) const { y.noalias() = m_ * x; }

void SparseTarget::apply_transpose(const Matrix& x, Matrix& y) const {
  y.noalias() = m_.transpose() * x;
}

SparseMatrix SparseTarget::rows(std::size_t begin, std::size_t end) const {
  check_row_range(begin, end, size());
  return m_.middleRows(static_cast<Index>(begin), static_cast<Index>(end - begin));
}

DenseTarget::DenseTarget(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "target matrix must be square");
  }
}

void DenseTarget::apply(const Matrix& x, Matrix& y) const { y.noalias() = m_ * x; }

void DenseTarget::apply_transpose(const Matrix& x, Matrix& y) const {
  y.noalias() = m_.transpose() * x;
}

SparseMatrix DenseTarget::rows(std::size_t begin, std::size_t end) const {
  check_row_range(begin, end, size());
  return m_.middleRows(static_cast<Index>(begin), static_cast<Index>(end - begin))
      .sparseView(0.0, 0.0);
}

PolynomialTarget::PolynomialTarget(SparseMatrix adjacency, std::vector<double> weights)
    : a_(std::move(adjacency)), w_(std::move(weights)) {
  if (w_.empty()) throw Error(ErrorCode::kInvalidArgument, "empty polynomial");
  a_.makeCompressed();
}

void PolynomialTarget::apply(const Matrix& x, Matrix& y) const {
  // A(w_1 x + A(w_2 x + ... + A(w_q x)))
  Matrix t = w_.back() * x;
  Matrix next(x.rows(), x.cols());
  for (std::size_t k = w_.size() - 1; k-- > 0;) {
    next.noalias() = a_ * t;
    t = next + w_[k] * x;
  }
  y.noalias() = a_ * t;
}

SparseMatrix PolynomialTarget::rows(std::size_t begin, std::size_t end) const {
  check_row_range(begin, end, size());
  SparseMatrix power =
      a_.middleRows(static_cast<Index>(begin), static_cast<Index>(end - begin));
  SparseMatrix acc = w_[0] * power;
  for (std::size_t k = 1; k < w_.size(); ++k) {
    power = (power * a_).pruned(0.0, 0.0);
    acc = acc + w_[k] * power;
  }
  return acc;
}

SparseMatrix normalized_laplacian(const Graph& g, bool allow_isolated) {
  const std::vector<double> deg = g.degrees();
  check_degrees(deg, allow_isolated);
  SparseMatrix n = degree_normalized(g, deg);
  SparseMatrix id(n.rows(), n.cols());
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < deg.size(); ++i) {
    if (deg[i] > 0.0) t.emplace_back(i, i, 1.0);
  }
  id.setFromTriplets(t.begin(), t.end());
  SparseMatrix l = id - n;
  l.makeCompressed();
  return l;
}

PolynomialTarget arope_polynomial(const Graph& g, std::vector<double> weights) {
  return PolynomialTarget(g.adjacency(), std::move(weights));
}

Vector transition_column_sums(const Graph& g, std::size_t order, bool allow_isolated) {
  const std::vector<double> deg = g.degrees();
  check_degrees(deg, allow_isolated);
  const SparseMatrix p = transition_matrix(g, deg);
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Ones(p.rows());
  for (std::size_t k = 0; k < order; ++k) c = c * p;
  return c.transpose();
}

std::vector<SparseMatrix> grarep_orders(const Graph& g, std::size_t max_order, double beta,
                                        std::size_t begin, std::size_t end,
                                        bool allow_isolated) {
  const std::size_t n = g.num_nodes();
  check_row_range(begin, end, n);
  if (max_order < 1) throw Error(ErrorCode::kInvalidArgument, "order must be >= 1");
  if (!(beta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "beta must be positive");
  const std::vector<double> deg = g.degrees();
  check_degrees(deg, allow_isolated);
  const SparseMatrix p = transition_matrix(g, deg);
  const double log_beta = std::log(beta);

  std::vector<Eigen::RowVectorXd> tau;
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Ones(static_cast<Index>(n));
  for (std::size_t k = 0; k < max_order; ++k) {
    c = c * p;
    tau.push_back(c);
  }

  const Index count = static_cast<Index>(end - begin);
  std::vector<std::vector<Eigen::Triplet<double>>> entries(max_order);
  // Row blocks bound the dense working set.
  const Index block = 256;
  for (Index start = 0; start < count; start += block) {
    const Index rows = std::min(block, count - start);
    Matrix s = Matrix(p.middleRows(static_cast<Index>(begin) + start, rows));
    for (std::size_t k = 0; k < max_order; ++k) {
      if (k > 0) s = s * p;
      const Eigen::RowVectorXd& t = tau[k];
      for (Index j = 0; j < s.cols(); ++j) {
        if (!(t(j) > 0.0)) continue;  // column unreachable: entries stay zero
        for (Index i = 0; i < rows; ++i) {
          const double v = s(i, j);
          if (v <= 0.0) continue;
          const double x = std::log(v / t(j)) - log_beta;
          if (x > 0.0) entries[k].emplace_back(start + i, j, x);
        }
      }
    }
  }
  std::vector<SparseMatrix> out;
  for (std::size_t k = 0; k < max_order; ++k) {
    SparseMatrix m(count, static_cast<Index>(n));
    m.setFromTriplets(entries[k].begin(), entries[k].end());
    m.makeCompressed();
    out.push_back(std::move(m));
  }
  return out;
}

SparseMatrix grarep_rows(const Graph& g, std::size_t order, double beta, std::size_t begin,
                         std::size_t end, bool allow_isolated) {
  return std::move(grarep_orders(g, order, beta, begin, end, allow_isolated).back());
}

SparseMatrix grarep_plp(const Graph& g, std::size_t order, double beta,
                        bool allow_isolated) {
  return grarep_rows(g, order, beta, 0, g.num_nodes(), allow_isolated);
}

Vector netmf_window_filter(const Vector& lambda, std::size_t window) {
  Vector sum = Vector::Zero(lambda.size());
  Vector power = lambda;
  for (std::size_t r = 0; r < window; ++r) {
    sum += power;
    power = power.cwiseProduct(lambda);
  }
  return sum / static_cast<double>(window);
}

NetmfMatrix netmf_log_matrix(const Graph& g, std::size_t h, std::size_t window,
                             double negative, const EigenOptions& opts,
                             bool allow_isolated) {
  const std::size_t n = g.num_nodes();
  if (h < 1 || h > n) {
    throw Error(ErrorCode::kInvalidArgument,
                "NetMF rank " + std::to_string(h) + " outside [1, " + std::to_string(n) + "]");
  }
  NetmfMatrix out;
  out.degrees = g.degrees();
  check_degrees(out.degrees, allow_isolated);
  out.vol = g.volume();

  const SparseMatrix normalized = degree_normalized(g, out.degrees);
  EigenPairs eig = lanczos_eig(make_operator(normalized), n, h,
                               EigenOrder::kDescendingAlgebraic, opts);
  out.U_h = std::move(eig.vectors);
  out.lambda_h = std::move(eig.values);

  Vector inv_sqrt(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt(static_cast<Index>(i)) =
        out.degrees[i] > 0.0 ? 1.0 / std::sqrt(out.degrees[i]) : 0.0;
  }
  const Matrix w = inv_sqrt.asDiagonal() * out.U_h;
  const Vector f = netmf_window_filter(out.lambda_h, window) * (out.vol / negative);
  Matrix m = (w * f.asDiagonal()) * w.transpose();
  out.log_matrix = (m + m.transpose()) * 0.5;
  out.log_matrix = out.log_matrix.unaryExpr(
      [](double v) { return v > 1.0 ? std::log(v) : 0.0; });
  return out;
}

std::unique_ptr<Target> drift_target(const Graph& g, const TargetSpec& spec) {
  switch (spec.method) {
    case Method::kLE:
      return std::make_unique<SparseTarget>(g.adjacency(), true);
    case Method::kAROPE:
      return std::make_unique<PolynomialTarget>(arope_polynomial(g, spec.arope_weights));
    case Method::kGraRep:
      return std::make_unique<SparseTarget>(
          grarep_plp(g, spec.grarep_order, spec.beta_for(g.num_nodes()),
                     spec.allow_isolated),
          false);
    case Method::kNetMF: {
      const std::size_t h = std::min(spec.netmf_rank, g.num_nodes());
      NetmfMatrix nm = netmf_log_matrix(g, h, spec.netmf_window, spec.netmf_negative,
                                        spec.eig, spec.allow_isolated);
      return std::make_unique<DenseTarget>(std::move(nm.log_matrix));
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method");
}

}  // namespace sip
