#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "sip/graph.hpp"
#include "sip/spectral.hpp"

namespace sip {

enum class Method { kLE, kAROPE, kGraRep, kNetMF };

std::string method_name(Method m);
/// Accepts "le", "arope", "grarep", "netmf".
Method parse_method(const std::string& name);

struct TargetSpec {
  Method method = Method::kAROPE;
  std::size_t d = 128;
  /// AROPE polynomial weights w_1..w_q.
  std::vector<double> arope_weights{1.0, 0.01, 0.0001};
  /// GraRep maximum transition order k and log shift; beta <= 0 means 1/n.
  std::size_t grarep_order = 4;
  double grarep_beta = 0.0;
  /// NetMF eigen rank h (capped at n), window T and negative samples b.
  std::size_t netmf_rank = 256;
  std::size_t netmf_window = 10;
  double netmf_negative = 1.0;
  /// Isolated nodes get zero rows instead of an error.
  bool allow_isolated = true;
  EigenOptions eig;

  void validate() const;
  double beta_for(std::size_t n) const {
    return grarep_beta > 0.0 ? grarep_beta : 1.0 / static_cast<double>(n);
  }
  /// Copy with beta pinned to its value for an n-node graph, so that targets
  /// built on larger graphs keep the same shift.
  TargetSpec resolved_for(std::size_t n) const {
    TargetSpec s = *this;
    s.grarep_beta = beta_for(n);
    return s;
  }
};

/// Square target matrix exposed as an operator with explicit row access.
class Target {
 public:
  virtual ~Target() = default;
  virtual std::size_t size() const = 0;
  virtual bool symmetric() const = 0;
  virtual void apply(const Matrix& x, Matrix& y) const = 0;
  virtual void apply_transpose(const Matrix& x, Matrix& y) const = 0;
  /// Rows [begin, end) over all columns.
  virtual SparseMatrix rows(std::size_t begin, std::size_t end) const = 0;

  LinearOperator op() const;
  LinearOperator op_transpose() const;
  /// All rows; symmetric targets are averaged with their transpose so the
  /// result is exactly symmetric.
  SparseMatrix materialize() const;
};

class SparseTarget final : public Target {
 public:
  SparseTarget(SparseMatrix m, bool symmetric);
  std::size_t size() const override { return static_cast<std::size_t>(m_.rows()); }
  bool symmetric() const override { return symmetric_; }
  void apply(const Matrix& x, Matrix& y) const override;
  void apply_transpose(const Matrix& x, Matrix& y) const override;
  SparseMatrix rows(std::size_t begin, std::size_t end) const override;
  const SparseMatrix& matrix() const { return m_; }

 private:
  SparseMatrix m_;
  bool symmetric_;
};

class DenseTarget final : public Target {
 public:
  explicit DenseTarget(Matrix m);
  std::size_t size() const override { return static_cast<std::size_t>(m_.rows()); }
  bool symmetric() const override { return true; }
  void apply(const Matrix& x, Matrix& y) const override;
  void apply_transpose(const Matrix& x, Matrix& y) const override;
  SparseMatrix rows(std::size_t begin, std::size_t end) const override;
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_;
};

/// S = sum_i w_i A^i, applied by Horner's rule without forming any power.
class PolynomialTarget final : public Target {
 public:
  PolynomialTarget(SparseMatrix adjacency, std::vector<double> weights);
  std::size_t size() const override { return static_cast<std::size_t>(a_.rows()); }
  bool symmetric() const override { return true; }
  void apply(const Matrix& x, Matrix& y) const override;
  void apply_transpose(const Matrix& x, Matrix& y) const override { apply(x, y); }
  SparseMatrix rows(std::size_t begin, std::size_t end) const override;

 private:
  SparseMatrix a_;
  std::vector<double> w_;
};

/// I - D^{-1/2} A D^{-1/2}. Isolated nodes throw unless `allow_isolated`, in
/// which case their row and column are zero.
SparseMatrix normalized_laplacian(const Graph& g, bool allow_isolated = false);

PolynomialTarget arope_polynomial(const Graph& g, std::vector<double> weights);

/// Column sums of (D^{-1}A)^order.
Vector transition_column_sums(const Graph& g, std::size_t order,
                              bool allow_isolated = false);

/// Rows [begin, end) of the clamped log transition matrix
/// max(0, log(S_pj / tau_j) - log beta) with S = (D^{-1}A)^order.
SparseMatrix grarep_rows(const Graph& g, std::size_t order, double beta,
                         std::size_t begin, std::size_t end,
                         bool allow_isolated = false);
/// Same rows for every order 1..max_order in one pass.
std::vector<SparseMatrix> grarep_orders(const Graph& g, std::size_t max_order,
                                        double beta, std::size_t begin,
                                        std::size_t end,
                                        bool allow_isolated = false);
SparseMatrix grarep_plp(const Graph& g, std::size_t order, double beta,
                        bool allow_isolated = false);

struct NetmfMatrix {
  Matrix log_matrix;  // n x n symmetric
  Matrix U_h;         // n x h
  Vector lambda_h;    // h, descending
  double vol = 0.0;
  std::vector<double> degrees;
};

/// Sum over r = 1..T of lambda^r, divided by T.
Vector netmf_window_filter(const Vector& lambda, std::size_t window);

NetmfMatrix netmf_log_matrix(const Graph& g, std::size_t h, std::size_t window,
                             double negative, const EigenOptions& opts = {},
                             bool allow_isolated = false);

/// The matrix whose spectrum and perturbation blocks the drift check uses:
/// adjacency for LE, the factorized target otherwise (highest order for
/// GraRep).
std::unique_ptr<Target> drift_target(const Graph& g, const TargetSpec& spec);

}  // namespace sip
