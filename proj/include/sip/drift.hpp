#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "json.hpp"
#include "sip/graph.hpp"
#include "sip/spectral.hpp"
#include "sip/targets.hpp"

namespace sip {

/// Blocks of the change from an n-node target M0 to the (n+m)-node target M1.
struct PerturbationSplit {
  std::size_t n = 0;
  std::size_t m = 0;
  SparseMatrix delta_M;  // M1[0:n, 0:n] - M0
  SparseMatrix E1;       // M1[0:n, n:n+m]
  SparseMatrix E2;       // M1[n:n+m, n:n+m]
};

PerturbationSplit split_perturbation(const Target& m0, const Target& m1);
/// Same split with M0 given explicitly (reused across many M1).
PerturbationSplit split_perturbation(const SparseMatrix& m0, const Target& m1);

struct DriftSpectrum {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
};

/// Two largest eigenvalues for a symmetric target, two largest singular
/// values otherwise.
DriftSpectrum drift_spectrum(const Target& m0, const EigenOptions& opts = {});

struct DriftVerdict {
  double rho_dm = 0.0;
  double rho_e1 = 0.0;
  double rho_e2 = 0.0;
  double lhs = 0.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double gap = 0.0;
  bool ok = false;
  /// ok recomputed after adding each norm's error bound to the left side.
  bool conservative_ok = false;
  double gamma = 0.0;
  double delta = 0.0;
  /// Bound on the rotation norm; present when delta > 2 gamma.
  std::optional<double> p_bound;
  bool norms_converged = true;
};

DriftVerdict drift_check(const PerturbationSplit& split, double sigma1, double sigma2,
                         const NormOptions& opts = {});

std::optional<double> p_bound(const DriftVerdict& v);

/// Finite reals as shortest round-trip decimal strings, absent values as null.
nlohmann::json to_json(const DriftVerdict& v);

struct ThresholdStep {
  std::size_t m = 0;
  DriftVerdict verdict;
};

struct ThresholdResult {
  /// Largest m such that every prefix 1..m passes.
  std::size_t m0 = 0;
  /// True when the scan stopped at the cap without a failure.
  bool capped = false;
  std::size_t cap = 0;
  DriftSpectrum spectrum;
  std::vector<ThresholdStep> trace;
};

/// Scans arrivals one node at a time against the fixed initial target and
/// stops at the first m whose check fails. The scan covers at most
/// min(m_max, arrivals) nodes.
ThresholdResult restart_threshold(const StreamScenario& scenario, const TargetSpec& spec,
                                  std::size_t m_max, const NormOptions& norm_opts = {});

}  // namespace sip
