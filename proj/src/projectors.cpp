#include "sip/projectors.hpp"

#include <cmath>
#include <string>

#include "sip/error.hpp"

namespace sip {

namespace {

using Index = Eigen::Index;

/// sigma^{-1/2}, with zero singular values mapped to zero.
Vector inverse_sqrt(const Vector& sigma) {
  return sigma.unaryExpr([](double s) { return s > 0.0 ? 1.0 / std::sqrt(s) : 0.0; });
}

Matrix scaled_embedding(const Matrix& u, const Vector& sigma) {
  return u * sigma.cwiseSqrt().asDiagonal();
}

/// (1/T) sum_{r=0}^{T-1} lambda^r, i.e. the window filter divided by lambda
/// without dividing.
Vector filter_over_lambda(const Vector& lambda, std::size_t window) {
  Vector sum = Vector::Zero(lambda.size());
  Vector power = Vector::Ones(lambda.size());
  for (std::size_t r = 0; r < window; ++r) {
    sum += power;
    power = power.cwiseProduct(lambda);
  }
  return sum / static_cast<double>(window);
}

SparseMatrix first_columns(const SparseMatrix& rows, Index n) {
  return rows.leftCols(n);
}

void check_prefix(const FitResult& model, const Graph& g1, std::size_t begin,
                  std::size_t end) {
  if (g1.num_nodes() < model.n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "graph has " + std::to_string(g1.num_nodes()) +
                    " nodes, fewer than the fitted " + std::to_string(model.n));
  }
  if (begin > end || end > g1.num_nodes()) {
    throw Error(ErrorCode::kOutOfRange, "node range outside the graph");
  }
}

FitResult fit_le(const Graph& g, const TargetSpec& spec, FitResult out) {
  const SparseMatrix l = normalized_laplacian(g, spec.allow_isolated);
  EigenPairs e = lanczos_eig(make_operator(l), g.num_nodes(), spec.d,
                             EigenOrder::kAscendingMagnitude, spec.eig);
  LEBasis b;
  b.U = e.vectors;
  b.lambda = e.values;
  b.sigma_clamped =
      e.values.unaryExpr([](double v) { return v < kLEClampBelow ? 1.0 : v; });
  out.embedding = std::move(e.vectors);
  out.basis = std::move(b);
  out.spectrum = drift_spectrum(SparseTarget(g.adjacency(), true), spec.eig);
  return out;
}

FitResult fit_arope(const Graph& g, const TargetSpec& spec, FitResult out) {
  const PolynomialTarget s = arope_polynomial(g, spec.arope_weights);
  EigenPairs e = lanczos_eig(s.op(), g.num_nodes(), spec.d,
                             EigenOrder::kDescendingMagnitude, spec.eig);
  AROPEBasis b;
  b.sigma = e.values.cwiseAbs();
  b.V = e.vectors;
  for (Index j = 0; j < e.values.size(); ++j) {
    if (e.values(j) < 0.0) b.V.col(j) = -b.V.col(j);
  }
  out.embedding = scaled_embedding(e.vectors, b.sigma);
  out.basis = std::move(b);
  out.spectrum = drift_spectrum(s, spec.eig);
  return out;
}

FitResult fit_grarep(const Graph& g, const TargetSpec& spec, FitResult out) {
  const std::size_t n = g.num_nodes();
  const std::size_t k = spec.grarep_order;
  const std::size_t part = spec.d / k;
  GraRepBasis b;
  b.beta = spec.beta_for(n);
  std::vector<SparseMatrix> x = grarep_orders(g, k, b.beta, 0, n, spec.allow_isolated);
  out.embedding.resize(static_cast<Index>(n), static_cast<Index>(spec.d));
  for (std::size_t i = 0; i < k; ++i) {
    SvdTriplet s = truncated_svd(make_operator(x[i]), make_transpose_operator(x[i]), n, n,
                                 part, spec.eig);
    out.embedding.middleCols(static_cast<Index>(i * part), static_cast<Index>(part)) =
        scaled_embedding(s.U, s.sigma);
    b.V.push_back(std::move(s.V));
    b.sigma.push_back(std::move(s.sigma));
  }
  out.spectrum = drift_spectrum(SparseTarget(std::move(x.back()), false), spec.eig);
  out.basis = std::move(b);
  return out;
}

FitResult fit_netmf(const Graph& g, const TargetSpec& spec, FitResult out) {
  const std::size_t n = g.num_nodes();
  const std::size_t h = std::min(spec.netmf_rank, n);
  NetmfMatrix nm = netmf_log_matrix(g, h, spec.netmf_window, spec.netmf_negative, spec.eig,
                                    spec.allow_isolated);
  const Matrix& lm = nm.log_matrix;
  SvdTriplet s = truncated_svd(make_operator(lm), make_transpose_operator(lm), n, n, spec.d,
                               spec.eig);
  NetMFBasis b;
  b.U_h = std::move(nm.U_h);
  b.lambda_h = std::move(nm.lambda_h);
  b.V = std::move(s.V);
  b.sigma = s.sigma;
  b.vol = nm.vol;
  b.window = spec.netmf_window;
  b.negative = spec.netmf_negative;
  b.degrees = std::move(nm.degrees);
  out.embedding = scaled_embedding(s.U, s.sigma);
  out.spectrum = drift_spectrum(DenseTarget(std::move(nm.log_matrix)), spec.eig);
  out.basis = std::move(b);
  return out;
}

}  // namespace

FitResult fit(const Graph& g, const TargetSpec& spec) {
  spec.validate();
  const std::size_t n = g.num_nodes();
  if (spec.d > n) {
    throw Error(ErrorCode::kInvalidArgument, "dimension " + std::to_string(spec.d) +
                                                 " exceeds node count " + std::to_string(n));
  }
  FitResult out;
  out.spec = spec;
  out.n = n;
  switch (spec.method) {
    case Method::kLE: return fit_le(g, spec, std::move(out));
    case Method::kAROPE: return fit_arope(g, spec, std::move(out));
    case Method::kGraRep: return fit_grarep(g, spec, std::move(out));
    case Method::kNetMF: return fit_netmf(g, spec, std::move(out));
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method");
}

std::size_t part_count(const MethodBasis& basis) {
  if (const auto* g = std::get_if<GraRepBasis>(&basis)) return g->V.size();
  return 1;
}

namespace {

template <typename Rows>
Matrix project_impl(const MethodBasis& basis, std::size_t part, const Rows& rows) {
  auto apply = [&](const Matrix& v, const Vector& scale) -> Matrix {
    if (rows.cols() != v.rows()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "target rows have " + std::to_string(rows.cols()) + " columns, basis has " +
                      std::to_string(v.rows()));
    }
    Matrix out = rows * v;
    return out * scale.asDiagonal();
  };
  return std::visit(
      [&](const auto& b) -> Matrix {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, LEBasis>) {
          return apply(b.U, b.sigma_clamped.cwiseInverse());
        } else if constexpr (std::is_same_v<B, GraRepBasis>) {
          if (part >= b.V.size()) throw Error(ErrorCode::kOutOfRange, "no such part");
          return apply(b.V[part], inverse_sqrt(b.sigma[part]));
        } else {
          return apply(b.V, inverse_sqrt(b.sigma));
        }
      },
      basis);
}

}  // namespace

Matrix project_rows(const MethodBasis& basis, std::size_t part, const SparseMatrix& rows) {
  return project_impl(basis, part, rows);
}

Matrix project_rows(const MethodBasis& basis, std::size_t part, const Matrix& rows) {
  return project_impl(basis, part, rows);
}

std::vector<Matrix> new_target_rows(const FitResult& model, const Graph& g1,
                                    std::size_t begin, std::size_t end) {
  check_prefix(model, g1, begin, end);
  const Index n = static_cast<Index>(model.n);
  const TargetSpec& spec = model.spec;
  std::vector<Matrix> out;
  switch (spec.method) {
    case Method::kLE: {
      const SparseMatrix l = normalized_laplacian(g1, spec.allow_isolated);
      out.emplace_back(first_columns(
          l.middleRows(static_cast<Index>(begin), static_cast<Index>(end - begin)), n));
      break;
    }
    case Method::kAROPE: {
      const PolynomialTarget s = arope_polynomial(g1, spec.arope_weights);
      out.emplace_back(first_columns(s.rows(begin, end), n));
      break;
    }
    case Method::kGraRep: {
      const auto& b = std::get<GraRepBasis>(model.basis);
      for (SparseMatrix& x :
           grarep_orders(g1, spec.grarep_order, b.beta, begin, end, spec.allow_isolated)) {
        out.emplace_back(first_columns(x, n));
      }
      break;
    }
    case Method::kNetMF: {
      const auto& b = std::get<NetMFBasis>(model.basis);
      if (b.degrees.size() != static_cast<std::size_t>(n)) {
        throw Error(ErrorCode::kStaleState, "NetMF basis has no degrees for its initial graph");
      }
      const SparseMatrix a_new = first_columns(
          g1.adjacency().middleRows(static_cast<Index>(begin), static_cast<Index>(end - begin)),
          n);
      // Degree toward the first n nodes; zero-degree rows stay zero.
      Vector inv_cross(a_new.rows());
      for (Index i = 0; i < a_new.rows(); ++i) {
        const double d = a_new.row(i).sum();
        inv_cross(i) = d > 0.0 ? 1.0 / d : 0.0;
      }
      Vector inv_sqrt0(n);
      for (Index j = 0; j < n; ++j) {
        const double d = b.degrees[static_cast<std::size_t>(j)];
        inv_sqrt0(j) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
      }
      const Matrix w = inv_sqrt0.asDiagonal() * b.U_h;
      const SparseMatrix walk = inv_cross.asDiagonal() * a_new;
      Matrix coords = walk * w;
      coords = coords * filter_over_lambda(b.lambda_h, b.window).asDiagonal();
      Matrix m = (b.vol / b.negative) * (coords * w.transpose());
      out.push_back(m.unaryExpr([](double v) { return v > 1.0 ? std::log(v) : 0.0; }));
      break;
    }
  }
  return out;
}

Matrix project_nodes(const FitResult& model, const Graph& g1, std::size_t begin,
                     std::size_t end) {
  const std::vector<Matrix> rows = new_target_rows(model, g1, begin, end);
  Matrix out(static_cast<Index>(end - begin), static_cast<Index>(model.spec.d));
  Index col = 0;
  for (std::size_t p = 0; p < rows.size(); ++p) {
    const Matrix part = project_rows(model.basis, p, rows[p]);
    out.middleCols(col, part.cols()) = part;
    col += part.cols();
  }
  if (!out.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "projection produced non-finite values");
  }
  return out;
}

GenerateResult generate(const FitResult& model, const Graph& g0, const Graph& g1, bool check,
                        const NormOptions& norm_opts) {
  if (g0.num_nodes() != model.n) {
    throw Error(ErrorCode::kStaleState, "initial graph has " + std::to_string(g0.num_nodes()) +
                                            " nodes, basis was fit on " +
                                            std::to_string(model.n));
  }
  check_prefix(model, g1, model.n, g1.num_nodes());
  GenerateResult out;
  if (check) {
    const TargetSpec resolved = model.spec.resolved_for(model.n);
    const auto t0 = drift_target(g0, resolved);
    const auto t1 = drift_target(g1, resolved);
    out.verdict = drift_check(split_perturbation(*t0, *t1), model.spectrum.sigma1,
                              model.spectrum.sigma2, norm_opts);
    if (!out.verdict->ok) {
      out.refit = fit(g1, model.spec);
      out.embedding = out.refit->embedding.bottomRows(
          static_cast<Index>(g1.num_nodes() - model.n));
      out.retrained = true;
      return out;
    }
  }
  out.embedding = project_nodes(model, g1, model.n, g1.num_nodes());
  return out;
}

GenerateResult generate(const FitResult& model, const Graph& g1, bool check,
                        const NormOptions& norm_opts) {
  if (g1.num_nodes() < model.n) {
    throw Error(ErrorCode::kDimensionMismatch, "graph smaller than the fitted prefix");
  }
  return generate(model, g1.prefix(model.n), g1, check, norm_opts);
}

}  // namespace sip
