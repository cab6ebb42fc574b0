#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sip/error.hpp"
#include "sip/eval.hpp"
#include "sip/synthetic.hpp"

using namespace sip;

namespace {

LabelTable table(std::size_t labels, std::vector<std::vector<std::uint32_t>> rows) {
  LabelTable t;
  t.label_count = labels;
  t.assignments = std::move(rows);
  return t;
}

// Confusion counts from dense 0/1 indicator matrices.
F1Scores brute_f1(const LabelTable& pred, const LabelTable& truth) {
  const std::size_t n = truth.num_nodes(), l = truth.label_count;
  std::vector<std::vector<int>> p(n, std::vector<int>(l, 0)), t = p;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto x : pred.assignments[i]) p[i][x] = 1;
    for (auto x : truth.assignments[i]) t[i][x] = 1;
  }
  double tp_all = 0, fp_all = 0, fn_all = 0, macro = 0;
  for (std::size_t j = 0; j < l; ++j) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += p[i][j] && t[i][j];
      fp += p[i][j] && !t[i][j];
      fn += !p[i][j] && t[i][j];
    }
    macro += tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
  }
  return {2 * tp_all / (2 * tp_all + fp_all + fn_all), macro / static_cast<double>(l)};
}

LabelTable random_labels(std::size_t n, std::size_t l, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.3);
  LabelTable t;
  t.label_count = l;
  t.assignments.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < l; ++j)
      if (coin(rng)) t.assignments[i].push_back(j);
  }
  return t;
}

}  // namespace

TEST_CASE("f1 on a hand example") {
  const auto truth = table(3, {{0}, {1}});
  const auto pred = table(3, {{0}, {2}});
  const F1Scores f = f1_scores(pred, truth);
  CHECK(f.micro == doctest::Approx(0.5));
  CHECK(f.macro == doctest::Approx(1.0 / 3.0));
  CHECK(f1_scores(truth, truth).micro == 1.0);
  CHECK(f1_scores(truth, truth).macro == doctest::Approx(2.0 / 3.0));
  const F1Scores none = f1_scores(table(3, {{2}, {0}}), truth);
  CHECK(none.micro == 0.0);
  CHECK(none.macro == 0.0);
  CHECK_THROWS_AS(f1_scores(table(3, {{0}}), truth), Error);
}

TEST_CASE("f1 matches a confusion-count oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto truth = random_labels(40, 6, seed);
    const auto pred = random_labels(40, 6, seed + 100);
    const F1Scores got = f1_scores(pred, truth);
    const F1Scores ref = brute_f1(pred, truth);
    CHECK(got.micro == doctest::Approx(ref.micro).epsilon(1e-14));
    CHECK(got.macro == doctest::Approx(ref.macro).epsilon(1e-14));
  }
}

TEST_CASE("logistic training separates clusters") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.3);
  const std::size_t n = 150;
  Matrix x(n, 2);
  LabelTable y = table(3, {});
  y.assignments.resize(n);
  const double centers[3][2] = {{0, 4}, {4, 0}, {-4, -4}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 3;
    x(static_cast<Eigen::Index>(i), 0) = centers[c][0] + noise(rng);
    x(static_cast<Eigen::Index>(i), 1) = centers[c][1] + noise(rng);
    y.assignments[i] = {static_cast<std::uint32_t>(c)};
  }
  TrainConfig cfg;
  cfg.max_iter = 200;
  const auto clf = train_ovr(x, y, cfg);
  const std::vector<std::size_t> k(n, 1);
  CHECK(f1_scores(predict_multilabel(clf, x, k), y).micro == 1.0);
  CHECK(clf.weights.rows() == 3);
  CHECK(clf.weights.allFinite());
}

TEST_CASE("converged model has a vanishing gradient") {
  const Matrix x = oracle::random_dense(60, 4, 9);
  const auto y = random_labels(60, 3, 5);
  TrainConfig cfg;
  cfg.l2 = 0.5;
  cfg.tol = 1e-8;
  cfg.max_iter = 20000;
  const auto clf = train_ovr(x, y, cfg);
  Matrix xb(60, 5);
  xb << x, Matrix::Ones(60, 1);
  for (Eigen::Index l = 0; l < 3; ++l) {
    REQUIRE(clf.iterations[static_cast<std::size_t>(l)] < cfg.max_iter);
    Vector r(60);
    for (Eigen::Index i = 0; i < 60; ++i) {
      const double z = xb.row(i).dot(clf.weights.col(l));
      const auto& a = y.assignments[static_cast<std::size_t>(i)];
      r(i) = 1.0 / (1.0 + std::exp(-z)) -
             (std::binary_search(a.begin(), a.end(), static_cast<std::uint32_t>(l)) ? 1.0 : 0.0);
    }
    Vector g = xb.transpose() * r;
    g.head(4) += cfg.l2 * clf.weights.col(l).head(4);
    CHECK(g.cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("zero-dimensional input learns label priors") {
  // 30 nodes: label 0 on 20, label 1 on 6, label 2 on none.
  LabelTable y = table(3, {});
  for (int i = 0; i < 30; ++i) {
    std::vector<std::uint32_t> a;
    if (i < 20) a.push_back(0);
    if (i % 5 == 0) a.push_back(1);
    y.assignments.push_back(a);
  }
  TrainConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iter = 5000;
  const auto clf = train_ovr(Matrix(30, 0), y, cfg);
  CHECK(clf.weights(0, 0) == doctest::Approx(std::log(20.0 / 10.0)).epsilon(1e-8));
  CHECK(clf.weights(0, 1) == doctest::Approx(std::log(6.0 / 24.0)).epsilon(1e-8));
  CHECK(clf.pinned[2]);
  CHECK(clf.weights(0, 2) < -10);
  const std::vector<std::size_t> k{1, 2, 0};
  const auto pred = predict_multilabel(clf, Matrix(3, 0), k);
  CHECK(pred.assignments[0] == std::vector<std::uint32_t>{0});
  CHECK(pred.assignments[1] == std::vector<std::uint32_t>{0, 1});
  CHECK(pred.assignments[2].empty());
  const std::vector<std::size_t> too_many{4, 0, 0};
  CHECK_THROWS_AS(predict_multilabel(clf, Matrix(3, 0), too_many), Error);
}

TEST_CASE("top-k selection matches a sort, ties to the lower id") {
  OvRClassifier clf;
  clf.weights = Matrix::Zero(3, 5);
  const Matrix x = oracle::random_dense(10, 2, 4);
  const std::vector<std::size_t> k(10, 3);
  for (const auto& a : predict_multilabel(clf, x, k).assignments)
    CHECK(a == std::vector<std::uint32_t>{0, 1, 2});

  clf.weights = oracle::random_dense(3, 5, 8);
  clf.weights.col(3) = clf.weights.col(1);  // exact ties between labels 1 and 3
  const Matrix s = clf.scores(x);
  const auto pred = predict_multilabel(clf, x, k);
  for (Eigen::Index i = 0; i < 10; ++i) {
    std::vector<std::uint32_t> ids{0, 1, 2, 3, 4};
    std::stable_sort(ids.begin(), ids.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return s(i, a) > s(i, b); });
    ids.resize(3);
    std::sort(ids.begin(), ids.end());
    CHECK(pred.assignments[static_cast<std::size_t>(i)] == ids);
  }
}

TEST_CASE("run_modes on a planted partition") {
  const LabeledGraph lg = planted_partition(320, 4, 0.15, 0.01, 7, 0.2);
  const StreamScenario sc = make_scenario(lg.graph, 260, {}, 10, &lg.labels);
  TargetSpec spec;
  spec.method = Method::kAROPE;
  spec.d = 16;
  const ModesResult r = run_modes(sc, spec, 40);
  REQUIRE(r.reports.size() == 3);
  CHECK_FALSE(r.skipped);
  for (const EvalReport& e : r.reports) {
    CHECK(e.n == 260);
    CHECK(e.m == 40);
    CHECK(e.micro_f1 >= 0.0);
    CHECK(e.micro_f1 <= 1.0);
  }
  // Modes 2 and 3 share the refit embedding.
  CHECK(r.reports[1].embedding_hash == r.reports[2].embedding_hash);
  CHECK(r.reports[0].embedding_hash != r.reports[2].embedding_hash);
  CHECK(r.reports[2].micro_f1 >= 0.8);
  CHECK(r.reports[0].micro_f1 >= 0.8);
  CHECK(r.micro_ratio == doctest::Approx(r.reports[0].micro_f1 / r.reports[2].micro_f1));
  CHECK(r.micro_ratio <= 1.1);
  CHECK(r.time_ratio > 0.0);

  const ModesResult none = run_modes(sc, spec, 0);
  CHECK(none.skipped);
  CHECK(none.reports.empty());
  CHECK_THROWS_AS(run_modes(sc, spec, 61), Error);

  const std::vector<ModesResult> runs{r, none, r};
  const Aggregate agg = aggregate(runs);
  CHECK(agg.evaluated == 2);
  CHECK(agg.skipped == 1);
  REQUIRE(agg.rows.size() == 3);
  CHECK(agg.rows[0].micro.mean == doctest::Approx(r.reports[0].micro_f1));
  CHECK(agg.rows[0].micro.stddev == 0.0);
  const auto j = to_json(agg);
  CHECK(j["rows"][2]["mode"] == "retrain_both");
  CHECK(to_json(r)["reports"].size() == 3);
}

TEST_CASE("summarize") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const Summary s = summarize(v);
  CHECK(s.count == 4);
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(summarize(std::vector<double>{}).count == 0);
  CHECK(summarize(std::vector<double>{7.0}).stddev == 0.0);
}

TEST_CASE("embedding hash is sensitive to values and shape") {
  const Matrix a = oracle::random_dense(4, 3, 1);
  Matrix b = a;
  CHECK(embedding_hash(a) == embedding_hash(b));
  b(2, 1) = std::nextafter(b(2, 1), 10.0);
  CHECK(embedding_hash(a) != embedding_hash(b));
  CHECK(embedding_hash(Matrix::Zero(2, 6)) != embedding_hash(Matrix::Zero(3, 4)));
}
