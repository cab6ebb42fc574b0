#include "sip/drift.hpp"

#include <array>
#include <charconv>
#include <string>

#include "sip/error.hpp"

namespace sip {

namespace {

using Index = Eigen::Index;

NormEstimate norm_of(const SparseMatrix& m, const NormOptions& opts) {
  if (m.rows() == 0 || m.cols() == 0 || m.nonZeros() == 0) return {};
  return spectral_norm(m, opts);
}

nlohmann::json real(double v) {
  if (!std::isfinite(v)) return nullptr;
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace

PerturbationSplit split_perturbation(const SparseMatrix& m0, const Target& m1) {
  if (m0.rows() != m0.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "initial target must be square");
  }
  const Index n = m0.rows();
  const Index total = static_cast<Index>(m1.size());
  if (total < n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "new target has " + std::to_string(total) + " rows, fewer than " +
                    std::to_string(n));
  }
  const Index m = total - n;
  PerturbationSplit s;
  s.n = static_cast<std::size_t>(n);
  s.m = static_cast<std::size_t>(m);
  const SparseMatrix top = m1.rows(0, static_cast<std::size_t>(n));
  const SparseMatrix bottom = m1.rows(static_cast<std::size_t>(n), static_cast<std::size_t>(total));
  s.delta_M = SparseMatrix(top.leftCols(n)) - m0;
  s.delta_M.prune(0.0, 0.0);
  s.E1 = top.rightCols(m);
  s.E2 = bottom.rightCols(m);
  return s;
}

PerturbationSplit split_perturbation(const Target& m0, const Target& m1) {
  return split_perturbation(m0.rows(0, m0.size()), m1);
}

DriftSpectrum drift_spectrum(const Target& m0, const EigenOptions& opts) {
  const std::size_t n = m0.size();
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "drift spectrum needs at least 2 nodes");
  }
  DriftSpectrum out;
  if (m0.symmetric()) {
    EigenPairs e = lanczos_eig(m0.op(), n, 2, EigenOrder::kDescendingAlgebraic, opts);
    out.sigma1 = e.values(0);
    out.sigma2 = e.values(1);
  } else {
    SvdTriplet s = truncated_svd(m0.op(), m0.op_transpose(), n, n, 2, opts);
    out.sigma1 = s.sigma(0);
    out.sigma2 = s.sigma(1);
  }
  return out;
}

DriftVerdict drift_check(const PerturbationSplit& split, double sigma1, double sigma2,
                         const NormOptions& opts) {
  const NormEstimate dm = norm_of(split.delta_M, opts);
  const NormEstimate e1 = norm_of(split.E1, opts);
  const NormEstimate e2 = norm_of(split.E2, opts);
  DriftVerdict v;
  v.rho_dm = dm.value;
  v.rho_e1 = e1.value;
  v.rho_e2 = e2.value;
  v.norms_converged = dm.converged && e1.converged && e2.converged;
  v.lhs = v.rho_dm + 2.0 * v.rho_e1 + v.rho_e2;
  v.sigma1 = sigma1;
  v.sigma2 = sigma2;
  v.gap = sigma1 - sigma2;
  v.ok = v.lhs < v.gap;
  const double upper = (dm.value + dm.error_bound) + 2.0 * (e1.value + e1.error_bound) +
                       (e2.value + e2.error_bound);
  v.conservative_ok = upper < v.gap;
  v.gamma = v.rho_e1;
  v.delta = v.gap - v.rho_dm - v.rho_e2;
  v.p_bound = p_bound(v);
  return v;
}

std::optional<double> p_bound(const DriftVerdict& v) {
  if (v.delta > 0.0 && v.delta > 2.0 * v.gamma) return 2.0 * v.gamma / v.delta;
  return std::nullopt;
}

nlohmann::json to_json(const DriftVerdict& v) {
  nlohmann::json j;
  j["rho_dm"] = real(v.rho_dm);
  j["rho_e1"] = real(v.rho_e1);
  j["rho_e2"] = real(v.rho_e2);
  j["lhs"] = real(v.lhs);
  j["sigma1"] = real(v.sigma1);
  j["sigma2"] = real(v.sigma2);
  j["gap"] = real(v.gap);
  j["ok"] = v.ok;
  j["conservative_ok"] = v.conservative_ok;
  j["gamma"] = real(v.gamma);
  j["delta"] = real(v.delta);
  j["p_bound"] = v.p_bound ? real(*v.p_bound) : nlohmann::json(nullptr);
  j["norms_converged"] = v.norms_converged;
  return j;
}

ThresholdResult restart_threshold(const StreamScenario& scenario, const TargetSpec& spec,
                                  std::size_t m_max, const NormOptions& norm_opts) {
  const std::size_t arrivals = scenario.arrivals();
  if (arrivals == 0) throw Error(ErrorCode::kInvalidArgument, "stream has no arrivals");
  if (m_max == 0) throw Error(ErrorCode::kInvalidArgument, "m_max must be positive");

  const std::size_t n = scenario.initial.num_nodes();
  const TargetSpec resolved = spec.resolved_for(n);
  const Graph full = scenario.replay();

  ThresholdResult out;
  out.cap = std::min(m_max, arrivals);
  const auto m0_target = drift_target(scenario.initial, resolved);
  out.spectrum = drift_spectrum(*m0_target, resolved.eig);
  const SparseMatrix m0 = m0_target->rows(0, n);

  for (std::size_t m = 1; m <= out.cap; ++m) {
    const auto m1 = drift_target(full.prefix(n + m), resolved);
    const PerturbationSplit split = split_perturbation(m0, *m1);
    DriftVerdict v = drift_check(split, out.spectrum.sigma1, out.spectrum.sigma2, norm_opts);
    const bool ok = v.ok;
    out.trace.push_back({m, std::move(v)});
    if (!ok) {
      out.m0 = m - 1;
      return out;
    }
  }
  out.m0 = out.cap;
  out.capped = true;
  return out;
}

}  // namespace sip
