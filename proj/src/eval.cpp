#include "sip/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "sip/error.hpp"

namespace sip {

namespace {

using Index = Eigen::Index;

constexpr double kPinnedBias = 50.0;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix with_bias(const Matrix& x) {
  Matrix out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()).setOnes();
  return out;
}

Matrix indicator(const LabelTable& y, std::size_t rows) {
  Matrix out = Matrix::Zero(static_cast<Index>(rows), static_cast<Index>(y.label_count));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::uint32_t l : y.assignments[i]) out(static_cast<Index>(i), l) = 1.0;
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

LabelTable head(const LabelTable& t, std::size_t begin, std::size_t end) {
  LabelTable out;
  out.label_count = t.label_count;
  out.label_names = t.label_names;
  out.assignments.assign(t.assignments.begin() + static_cast<std::ptrdiff_t>(begin),
                         t.assignments.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

std::vector<std::size_t> label_counts(const LabelTable& t) {
  std::vector<std::size_t> k;
  k.reserve(t.num_nodes());
  for (const auto& a : t.assignments) k.push_back(a.size());
  return k;
}

EvalReport score(EvalMode mode, const OvRClassifier& clf, const Matrix& emb,
                 const LabelTable& truth, double seconds, const TargetSpec& spec, std::size_t n) {
  const std::vector<std::size_t> k = label_counts(truth);
  const F1Scores f1 = f1_scores(predict_multilabel(clf, emb, k), truth);
  EvalReport r;
  r.mode = mode;
  r.method = spec.method;
  r.n = n;
  r.m = truth.num_nodes();
  r.micro_f1 = f1.micro;
  r.macro_f1 = f1.macro;
  r.embed_time_s = seconds;
  r.embedding_hash = embedding_hash(emb);
  return r;
}

double ratio(double a, double b) { return b > 0.0 ? a / b : 0.0; }

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"stderr", s.std_error}, {"count", s.count}};
}

}  // namespace

Matrix OvRClassifier::scores(const Matrix& x) const {
  if (x.cols() + 1 != weights.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding has " + std::to_string(x.cols()) +
                                                   " columns, classifier expects " +
                                                   std::to_string(weights.rows() - 1));
  }
  return with_bias(x) * weights;
}

OvRClassifier train_ovr(const Matrix& x, const LabelTable& y, const TrainConfig& config) {
  if (static_cast<std::size_t>(x.rows()) != y.num_nodes()) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding rows and label rows differ");
  }
  if (!x.allFinite()) throw Error(ErrorCode::kInvalidArgument, "embedding is not finite");
  const Index n = x.rows();
  const Index p = x.cols() + 1;
  const Index labels = static_cast<Index>(y.label_count);
  const Matrix xb = with_bias(x);
  const Matrix target = indicator(y, static_cast<std::size_t>(n));

  OvRClassifier clf;
  clf.config = config;
  clf.weights = Matrix::Zero(p, labels);
  clf.pinned.assign(static_cast<std::size_t>(labels), false);
  clf.iterations.assign(static_cast<std::size_t>(labels), 0);

  std::vector<Index> active;
  for (Index l = 0; l < labels; ++l) {
    const double pos = target.col(l).sum();
    if (pos == 0.0 || pos == static_cast<double>(n)) {
      clf.pinned[static_cast<std::size_t>(l)] = true;
      clf.weights(p - 1, l) = pos == 0.0 ? -kPinnedBias : kPinnedBias;
    } else {
      active.push_back(l);
    }
  }
  if (active.empty() || n == 0) return clf;

  // Step size from the Lipschitz constant ||xb||^2 / 4 + l2.
  Eigen::SelfAdjointEigenSolver<Matrix> gram(xb.transpose() * xb, Eigen::EigenvaluesOnly);
  const double lipschitz = 0.25 * gram.eigenvalues().maxCoeff() + config.l2;
  const double step = 1.0 / lipschitz;

  Vector reg = Vector::Constant(p, config.l2);
  reg(p - 1) = 0.0;  // bias is not penalized

  // Accelerated gradient with adaptive restart, one column per label.
  const Index a = static_cast<Index>(active.size());
  Matrix w = Matrix::Zero(p, a);
  Matrix v = w;
  Matrix yb(n, a);
  for (Index j = 0; j < a; ++j) yb.col(j) = target.col(active[static_cast<std::size_t>(j)]);
  Vector t = Vector::Ones(a);
  std::vector<bool> done(static_cast<std::size_t>(a), false);
  std::vector<std::size_t> iters(static_cast<std::size_t>(a), config.max_iter);

  auto gradient = [&](const Matrix& at) {
    Matrix z = xb * at;
    z = z.unaryExpr(&sigmoid) - yb;
    Matrix g = xb.transpose() * z;
    g += reg.asDiagonal() * at;
    return g;
  };

  for (std::size_t it = 0; it < config.max_iter; ++it) {
    const Matrix gw = gradient(w);
    bool all_done = true;
    for (Index j = 0; j < a; ++j) {
      if (done[static_cast<std::size_t>(j)]) continue;
      if (gw.col(j).cwiseAbs().maxCoeff() <= config.tol) {
        done[static_cast<std::size_t>(j)] = true;
        iters[static_cast<std::size_t>(j)] = it;
      } else {
        all_done = false;
      }
    }
    if (all_done) break;
    const Matrix gv = gradient(v);
    for (Index j = 0; j < a; ++j) {
      if (done[static_cast<std::size_t>(j)]) continue;
      const Vector next = v.col(j) - step * gv.col(j);
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t(j) * t(j)));
      const Vector delta = next - w.col(j);
      if (gv.col(j).dot(delta) > 0.0) {
        // Momentum points uphill: restart from the plain step.
        t(j) = 1.0;
        v.col(j) = next;
      } else {
        v.col(j) = next + ((t(j) - 1.0) / t_next) * delta;
        t(j) = t_next;
      }
      w.col(j) = next;
    }
  }
  for (Index j = 0; j < a; ++j) {
    const auto l = static_cast<std::size_t>(active[static_cast<std::size_t>(j)]);
    clf.weights.col(static_cast<Index>(l)) = w.col(j);
    clf.iterations[l] = iters[static_cast<std::size_t>(j)];
  }
  return clf;
}

LabelTable predict_multilabel(const OvRClassifier& clf, const Matrix& x,
                              std::span<const std::size_t> k_per_node) {
  if (k_per_node.size() != static_cast<std::size_t>(x.rows())) {
    throw Error(ErrorCode::kDimensionMismatch, "one label count per node is required");
  }
  const Matrix s = clf.scores(x);
  const std::size_t labels = clf.label_count();
  LabelTable out;
  out.label_count = labels;
  out.assignments.resize(k_per_node.size());
  std::vector<std::uint32_t> order(labels);
  for (std::size_t i = 0; i < k_per_node.size(); ++i) {
    const std::size_t k = k_per_node[i];
    if (k > labels) {
      throw Error(ErrorCode::kInvalidArgument, "node " + std::to_string(i) + " asks for " +
                                                   std::to_string(k) + " labels, only " +
                                                   std::to_string(labels) + " exist");
    }
    std::iota(order.begin(), order.end(), 0u);
    const Index row = static_cast<Index>(i);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        const double sa = s(row, a), sb = s(row, b);
                        return sa > sb || (sa == sb && a < b);
                      });
    out.assignments[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.assignments[i].begin(), out.assignments[i].end());
  }
  return out;
}

F1Scores f1_scores(const LabelTable& pred, const LabelTable& truth) {
  if (pred.num_nodes() != truth.num_nodes()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "prediction covers " + std::to_string(pred.num_nodes()) + " nodes, truth " +
                    std::to_string(truth.num_nodes()));
  }
  const std::size_t labels = std::max(pred.label_count, truth.label_count);
  std::vector<double> tp(labels, 0.0), fp(labels, 0.0), fn(labels, 0.0);
  for (std::size_t i = 0; i < truth.num_nodes(); ++i) {
    const auto& p = pred.assignments[i];
    const auto& t = truth.assignments[i];
    for (std::uint32_t l : p) {
      (std::binary_search(t.begin(), t.end(), l) ? tp : fp)[l] += 1.0;
    }
    for (std::uint32_t l : t) {
      if (!std::binary_search(p.begin(), p.end(), l)) fn[l] += 1.0;
    }
  }
  auto f1 = [](double a, double b, double c) {
    const double den = 2.0 * a + b + c;
    return den > 0.0 ? 2.0 * a / den : 0.0;
  };
  F1Scores out;
  double stp = 0, sfp = 0, sfn = 0, macro = 0;
  for (std::size_t l = 0; l < labels; ++l) {
    stp += tp[l];
    sfp += fp[l];
    sfn += fn[l];
    macro += f1(tp[l], fp[l], fn[l]);
  }
  out.micro = f1(stp, sfp, sfn);
  out.macro = labels > 0 ? macro / static_cast<double>(labels) : 0.0;
  return out;
}

std::string mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::kSipKeepModel:
      return "sip_keep_model";
    case EvalMode::kRetrainEmbedKeepModel:
      return "retrain_embed_keep_model";
    case EvalMode::kRetrainBoth:
      return "retrain_both";
  }
  return "?";
}

std::uint64_t embedding_hash(const Matrix& m) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()),
                                 static_cast<std::uint64_t>(m.cols())};
  mix(dims, sizeof dims);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      mix(&v, sizeof v);
    }
  }
  return h;
}

ModesResult run_modes(const StreamScenario& scenario, const TargetSpec& spec, std::size_t m0,
                      const TrainConfig& config) {
  const std::size_t n = scenario.initial.num_nodes();
  if (scenario.labels.num_nodes() != scenario.total_nodes()) {
    throw Error(ErrorCode::kMissingData, "scenario has no labels for every node");
  }
  if (m0 > scenario.arrivals()) {
    throw Error(ErrorCode::kOutOfRange, "m0 exceeds the number of arrivals");
  }
  ModesResult out;
  out.n = n;
  out.m0 = m0;
  if (m0 == 0) {
    out.skipped = true;
    return out;
  }
  const Graph g1 = scenario.replay().prefix(n + m0);
  const LabelTable train = head(scenario.labels, 0, n);
  const LabelTable test = head(scenario.labels, n, n + m0);

  const FitResult base = fit(scenario.initial, spec);
  const OvRClassifier kept = train_ovr(base.embedding, train, config);

  auto start = std::chrono::steady_clock::now();
  const GenerateResult sip = generate(base, scenario.initial, g1, false);
  const double sip_time = seconds_since(start);

  start = std::chrono::steady_clock::now();
  const FitResult refit = fit(g1, spec);
  const double refit_time = seconds_since(start);
  const Matrix tail = refit.embedding.bottomRows(static_cast<Index>(m0));

  const OvRClassifier retrained =
      train_ovr(refit.embedding.topRows(static_cast<Index>(n)), train, config);

  out.reports.push_back(
      score(EvalMode::kSipKeepModel, kept, sip.embedding, test, sip_time, spec, n));
  out.reports.push_back(
      score(EvalMode::kRetrainEmbedKeepModel, kept, tail, test, refit_time, spec, n));
  out.reports.push_back(score(EvalMode::kRetrainBoth, retrained, tail, test, refit_time, spec, n));
  out.micro_ratio = ratio(out.reports[0].micro_f1, out.reports[2].micro_f1);
  out.macro_ratio = ratio(out.reports[0].macro_f1, out.reports[2].macro_f1);
  out.time_ratio = ratio(out.reports[0].embed_time_s, out.reports[2].embed_time_s);
  return out;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.count - 1));
    s.std_error = s.stddev / std::sqrt(static_cast<double>(s.count));
  }
  return s;
}

Aggregate aggregate(std::span<const ModesResult> runs) {
  Aggregate out;
  for (EvalMode mode :
       {EvalMode::kSipKeepModel, EvalMode::kRetrainEmbedKeepModel, EvalMode::kRetrainBoth}) {
    std::vector<double> micro, macro, time;
    for (const ModesResult& r : runs) {
      if (r.skipped) continue;
      const EvalReport& e = r.reports[static_cast<std::size_t>(mode)];
      micro.push_back(e.micro_f1);
      macro.push_back(e.macro_f1);
      time.push_back(e.embed_time_s);
    }
    out.rows.push_back({mode, summarize(micro), summarize(macro), summarize(time)});
  }
  for (const ModesResult& r : runs) (r.skipped ? out.skipped : out.evaluated) += 1;
  out.micro_ratio = ratio(out.rows[0].micro.mean, out.rows[2].micro.mean);
  out.macro_ratio = ratio(out.rows[0].macro.mean, out.rows[2].macro.mean);
  out.time_ratio = ratio(out.rows[0].time.mean, out.rows[2].time.mean);
  return out;
}

Matrix target_vectors(const Graph& g, const TargetSpec& spec, std::size_t d) {
  const auto t = drift_target(g, spec);
  const std::size_t n = t->size();
  if (t->symmetric()) {
    return lanczos_eig(t->op(), n, d, EigenOrder::kDescendingMagnitude, spec.eig).vectors;
  }
  return truncated_svd(t->op(), t->op_transpose(), n, n, d, spec.eig).U;
}

std::vector<HeatmapRow> correlation_heatmap(const StreamScenario& scenario, const TargetSpec& spec,
                                            std::span<const std::size_t> grid) {
  const std::size_t n = scenario.initial.num_nodes();
  const TargetSpec resolved = spec.resolved_for(n);
  const Matrix before = target_vectors(scenario.initial, resolved, spec.d);
  const Graph full = scenario.replay();
  std::vector<HeatmapRow> rows;
  for (std::size_t m : grid) {
    HeatmapRow row;
    row.m = m;
    try {
      if (m > scenario.arrivals()) {
        throw Error(ErrorCode::kOutOfRange, "m = " + std::to_string(m) + " exceeds the stream");
      }
      const Matrix after = target_vectors(full.prefix(n + m), resolved, spec.d);
      row.correlation = prefix_correlation(before, after).values;
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"mode", mode_name(r.mode)},
          {"method", method_name(r.method)},
          {"n", r.n},
          {"m", r.m},
          {"micro_f1", r.micro_f1},
          {"macro_f1", r.macro_f1},
          {"embed_time_s", r.embed_time_s},
          {"embedding_hash", r.embedding_hash}};
}

nlohmann::json to_json(const ModesResult& r) {
  nlohmann::json reports = nlohmann::json::array();
  for (const EvalReport& e : r.reports) reports.push_back(to_json(e));
  return {{"n", r.n},
          {"m0", r.m0},
          {"skipped", r.skipped},
          {"reports", reports},
          {"micro_ratio", r.micro_ratio},
          {"macro_ratio", r.macro_ratio},
          {"time_ratio", r.time_ratio}};
}

nlohmann::json to_json(const Aggregate& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (const AggregateRow& r : a.rows) {
    rows.push_back({{"mode", mode_name(r.mode)},
                    {"micro_f1", summary_json(r.micro)},
                    {"macro_f1", summary_json(r.macro)},
                    {"embed_time_s", summary_json(r.time)}});
  }
  return {{"rows", rows},
          {"micro_ratio", a.micro_ratio},
          {"macro_ratio", a.macro_ratio},
          {"time_ratio", a.time_ratio},
          {"evaluated", a.evaluated},
          {"skipped", a.skipped}};
}

}  // namespace sip
