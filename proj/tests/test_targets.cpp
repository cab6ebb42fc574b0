#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "sip/error.hpp"
#include "sip/targets.hpp"

using namespace sip;

namespace {

Graph from_text(const std::string& text) {
  std::istringstream in(text);
  return load_edge_list(in, true).graph;
}

Graph k2() { return from_text("0 1\n"); }
Graph k3() { return from_text("0 1\n1 2\n2 0\n"); }
Graph p3() { return from_text("0 1\n1 2\n"); }

double max_abs(const oracle::Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("normalized_laplacian small graphs") {
  const oracle::Matrix l2 = oracle::dense(normalized_laplacian(k2()));
  CHECK(l2(0, 0) == 1.0);
  CHECK(l2(1, 1) == 1.0);
  CHECK(l2(0, 1) == -1.0);
  CHECK(l2(1, 0) == -1.0);
  const oracle::Matrix l3 = oracle::dense(normalized_laplacian(k3()));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(l3(i, j) == (i == j ? 1.0 : -0.5));
}

TEST_CASE("normalized_laplacian rejects isolated nodes unless allowed") {
  std::vector<Edge> e{{0, 1, 1.0}};
  const Graph g = Graph::from_edges(3, e);
  try {
    normalized_laplacian(g);
    FAIL("expected an exception");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kZeroDegree);
  }
  const oracle::Matrix l = oracle::dense(normalized_laplacian(g, true));
  CHECK(l.row(2).isZero());
  CHECK(l.col(2).isZero());
  CHECK(l(0, 1) == -1.0);
}

TEST_CASE("normalized_laplacian matches the dense formula") {
  const Graph g = oracle::random_connected_graph(250, 0.03, 5, true);
  const oracle::Matrix l = oracle::dense(normalized_laplacian(g));
  CHECK(max_abs(l - oracle::dense_laplacian(g)) <= 1e-15);
  CHECK(max_abs(l - l.transpose()) == 0.0);
}

TEST_CASE("arope_polynomial") {
  SUBCASE("single weight is the adjacency") {
    const Graph g = k3();
    auto s = arope_polynomial(g, {1.0});
    CHECK(max_abs(oracle::dense(s.materialize()) - oracle::dense_adjacency(g)) == 0.0);
  }
  SUBCASE("K2 with weights (1, 0.01)") {
    auto s = arope_polynomial(k2(), {1.0, 0.01});
    const oracle::Matrix m = oracle::dense(s.materialize());
    CHECK(m(0, 0) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(m(1, 1) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(m(0, 1) == 1.0);
    CHECK(m(1, 0) == 1.0);
  }
  SUBCASE("default weights on P3 and a random graph match the dense polynomial") {
    const std::vector<double> w{1.0, 0.01, 0.0001};
    for (const Graph& g : {p3(), oracle::random_connected_graph(200, 0.04, 7, true)}) {
      auto s = arope_polynomial(g, w);
      const oracle::Matrix ref = oracle::dense_polynomial(g, w);
      const oracle::Matrix m = oracle::dense(s.materialize());
      const double scale = max_abs(ref);
      CHECK(max_abs(m - ref) <= 1e-14 * scale);
      CHECK(max_abs(m - m.transpose()) == 0.0);
      // Operator form and row extraction agree with the dense polynomial.
      const oracle::Matrix x = oracle::random_dense(m.cols(), 3, 1);
      oracle::Matrix y(m.rows(), 3);
      s.apply(x, y);
      CHECK(max_abs(y - ref * x) <= 1e-12 * scale * max_abs(x) * m.cols());
      const oracle::Matrix r = oracle::dense(s.rows(1, 3));
      CHECK(max_abs(r - ref.middleRows(1, 2)) <= 1e-14 * scale);
    }
  }
}

TEST_CASE("grarep_plp") {
  SUBCASE("K2 first order with beta 1/2") {
    const oracle::Matrix x = oracle::dense(grarep_plp(k2(), 1, 0.5));
    CHECK(x(0, 0) == 0.0);
    CHECK(x(1, 1) == 0.0);
    CHECK(x(0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(x(1, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
  SUBCASE("large beta clamps everything to zero") {
    const Graph g = oracle::random_connected_graph(30, 0.2, 3, true);
    // S_pj / tau_j <= 1 / min tau, so beta above that makes every log negative.
    const Vector tau = transition_column_sums(g, 2);
    CHECK(grarep_plp(g, 2, 1.0 / tau.minCoeff()).nonZeros() == 0);
  }
  SUBCASE("P3 second order with beta 1/3") {
    const oracle::Matrix x = oracle::dense(grarep_plp(p3(), 2, 1.0 / 3.0));
    CHECK(max_abs(x - oracle::dense_grarep(p3(), 2, 1.0 / 3.0)) <= 1e-15);
  }
  SUBCASE("random graphs, several orders") {
    const Graph g = oracle::random_connected_graph(300, 0.02, 13, true);
    const double beta = 1.0 / 300.0;
    auto all = grarep_orders(g, 4, beta, 0, 300);
    for (int k = 1; k <= 4; ++k) {
      const oracle::Matrix x = oracle::dense(all[static_cast<std::size_t>(k - 1)]);
      CHECK(max_abs(x - oracle::dense_grarep(g, k, beta)) <= 1e-12);
      CHECK(x.minCoeff() >= 0.0);
      CHECK(x.allFinite());
    }
    // Row extraction equals the matching rows of the full matrix.
    const oracle::Matrix rows = oracle::dense(grarep_rows(g, 3, beta, 290, 300));
    CHECK(max_abs(rows - oracle::dense(all[2]).bottomRows(10)) == 0.0);
  }
}

TEST_CASE("netmf_log_matrix") {
  SUBCASE("K2 with h=2, T=1, b=1") {
    auto nm = netmf_log_matrix(k2(), 2, 1, 1.0);
    CHECK(nm.vol == 2.0);
    CHECK(nm.log_matrix(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(nm.log_matrix(0, 0)) <= 1e-12);
    CHECK(nm.log_matrix(0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(nm.log_matrix(1, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("window filter") {
    Vector lambda(3);
    lambda << 1.0, -0.5, 0.25;
    const Vector f = netmf_window_filter(lambda, 3);
    CHECK(f(0) == doctest::Approx(1.0));
    CHECK(f(1) == doctest::Approx((-0.5 + 0.25 - 0.125) / 3));
    CHECK(f(2) == doctest::Approx((0.25 + 0.0625 + 0.015625) / 3));
  }
  SUBCASE("all entries at most one give a zero target") {
    // Large b scales every entry below 1.
    const Graph g = oracle::random_connected_graph(40, 0.1, 2, false);
    auto nm = netmf_log_matrix(g, 10, 10, 1e9);
    CHECK(nm.log_matrix.isZero(0.0));
  }
  SUBCASE("matches a dense pipeline") {
    const Graph g = oracle::random_connected_graph(200, 0.05, 4, true);
    auto nm = netmf_log_matrix(g, 64, 10, 1.0);
    const oracle::Matrix ref = oracle::dense_netmf(g, 64, 10, 1.0);
    CHECK(max_abs(nm.log_matrix - ref) <= 1e-8);
    CHECK(max_abs(nm.log_matrix - nm.log_matrix.transpose()) == 0.0);
  }
  SUBCASE("rank above n is rejected") {
    CHECK_THROWS_AS(netmf_log_matrix(k2(), 3, 1, 1.0), Error);
  }
}

TEST_CASE("drift_target per method") {
  const Graph g = oracle::random_connected_graph(60, 0.1, 8, true);
  TargetSpec spec;
  spec.d = 8;
  spec.netmf_rank = 20;
  spec.grarep_order = 2;
  spec.method = Method::kLE;
  CHECK(max_abs(oracle::dense(drift_target(g, spec)->materialize()) -
                oracle::dense_adjacency(g)) == 0.0);
  spec.method = Method::kGraRep;
  auto t = drift_target(g, spec);
  CHECK_FALSE(t->symmetric());
  CHECK(max_abs(oracle::dense(t->materialize()) - oracle::dense_grarep(g, 2, 1.0 / 60)) <= 1e-12);
}

TEST_CASE("TargetSpec validation") {
  TargetSpec s;
  CHECK_NOTHROW(s.validate());
  s.method = Method::kGraRep;
  s.d = 10;
  CHECK_THROWS_AS(s.validate(), Error);
  s.d = 12;
  s.grarep_order = 3;
  CHECK_NOTHROW(s.validate());
  s.netmf_rank = 4;
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK(parse_method("netmf") == Method::kNetMF);
  CHECK(method_name(Method::kGraRep) == "grarep");
  CHECK_THROWS_AS(parse_method("deepwalk"), Error);
}
