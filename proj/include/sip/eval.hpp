#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sip/graph.hpp"
#include "sip/projectors.hpp"
#include "sip/spectral.hpp"
#include "sip/targets.hpp"

namespace sip {

struct TrainConfig {
  double l2 = 1.0;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  std::uint64_t seed = 42;
};

/// One binary logistic model per label over [x, 1].
struct OvRClassifier {
  Matrix weights;  // (d+1) x L, last row is the bias
  /// Labels without positive (or without negative) examples; their models
  /// are fixed to a constant score.
  std::vector<bool> pinned;
  std::vector<std::size_t> iterations;
  TrainConfig config;

  std::size_t label_count() const { return static_cast<std::size_t>(weights.cols()); }
  Matrix scores(const Matrix& x) const;
};

OvRClassifier train_ovr(const Matrix& x, const LabelTable& y, const TrainConfig& config = {});

/// Top k_per_node[i] labels by score; ties go to the lower label id.
LabelTable predict_multilabel(const OvRClassifier& clf, const Matrix& x,
                              std::span<const std::size_t> k_per_node);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

/// Macro averages over all labels of either table; a label with no support
/// and no predictions scores 0.
F1Scores f1_scores(const LabelTable& pred, const LabelTable& truth);

enum class EvalMode { kSipKeepModel, kRetrainEmbedKeepModel, kRetrainBoth };
std::string mode_name(EvalMode mode);

struct EvalReport {
  EvalMode mode = EvalMode::kSipKeepModel;
  Method method = Method::kAROPE;
  std::size_t n = 0;
  std::size_t m = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double embed_time_s = 0.0;
  std::uint64_t embedding_hash = 0;
};

struct ModesResult {
  std::size_t n = 0;
  std::size_t m0 = 0;
  /// m0 = 0: nothing to evaluate.
  bool skipped = false;
  std::vector<EvalReport> reports;  // one per mode, in enum order
  double micro_ratio = 0.0;         // mode 1 / mode 3
  double macro_ratio = 0.0;
  double time_ratio = 0.0;
};

/// FNV-1a over the raw bytes of the matrix (row-major).
std::uint64_t embedding_hash(const Matrix& m);

/// The three verification modes on the first m0 arrivals of `scenario`.
ModesResult run_modes(const StreamScenario& scenario, const TargetSpec& spec, std::size_t m0,
                      const TrainConfig& config = {});

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double std_error = 0.0;
  std::size_t count = 0;
};
Summary summarize(std::span<const double> values);

struct AggregateRow {
  EvalMode mode = EvalMode::kSipKeepModel;
  Summary micro;
  Summary macro;
  Summary time;
};

struct Aggregate {
  std::vector<AggregateRow> rows;  // one per mode
  double micro_ratio = 0.0;        // mean mode-1 micro / mean mode-3 micro
  double macro_ratio = 0.0;
  double time_ratio = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

Aggregate aggregate(std::span<const ModesResult> runs);

/// Top-d vectors of the drift target: eigenvectors by magnitude when it is
/// symmetric, left singular vectors otherwise.
Matrix target_vectors(const Graph& g, const TargetSpec& spec, std::size_t d);

struct HeatmapRow {
  std::size_t m = 0;
  bool failed = false;
  std::string error;
  std::vector<double> correlation;  // one per vector
};

/// |corr| between the vectors of the n-node graph and the first n entries of
/// the vectors after m arrivals, for each m in `grid`. A failing refit marks
/// its row and the scan continues.
std::vector<HeatmapRow> correlation_heatmap(const StreamScenario& scenario, const TargetSpec& spec,
                                            std::span<const std::size_t> grid);

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const ModesResult& r);
nlohmann::json to_json(const Aggregate& a);

}  // namespace sip
