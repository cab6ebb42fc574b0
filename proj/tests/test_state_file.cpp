#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "sip/error.hpp"
#include "sip/state_file.hpp"

using namespace sip;

namespace {

TargetSpec spec_for(Method method) {
  TargetSpec s;
  s.method = method;
  s.d = 8;
  s.grarep_order = 2;
  s.netmf_rank = 30;
  s.arope_weights = {1.0, 0.1};
  s.eig.seed = 7;
  return s;
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

ErrorCode code_of(const std::string& bytes) {
  try {
    decode_state(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("state round trip is bit exact for every method") {
  const Graph full = oracle::random_connected_graph(70, 0.1, 3, true);
  const Graph g0 = full.prefix(60);
  for (Method method : {Method::kLE, Method::kAROPE, Method::kGraRep, Method::kNetMF}) {
    CAPTURE(method_name(method));
    const FitResult f = fit(g0, spec_for(method));
    const std::string bytes = encode_state(f);
    FitResult back = decode_state(bytes);
    bind_graph(back, g0);
    CHECK(encode_state(back) == bytes);
    CHECK(back.n == f.n);
    CHECK(back.spec.method == method);
    CHECK(back.spec.d == 8);
    CHECK(back.spec.arope_weights == f.spec.arope_weights);
    CHECK(back.spec.eig.seed == 7);
    CHECK(back.spectrum.sigma1 == f.spectrum.sigma1);
    CHECK(back.spectrum.sigma2 == f.spectrum.sigma2);
    CHECK(back.embedding.size() == 0);
    // Projection through the loaded basis matches the original exactly.
    CHECK(same_bits(project_nodes(back, full, 60, 70), project_nodes(f, full, 60, 70)));
  }
}

TEST_CASE("state arrays per method") {
  const Graph g = oracle::random_connected_graph(50, 0.12, 5, true);
  SUBCASE("NetMF stores n*h + h + n*d + d reals") {
    const FitResult f = fit(g, spec_for(Method::kNetMF));
    const std::string bytes = encode_state(f);
    const std::uint64_t header = [&] {
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[9 + i])) << (8 * i);
      return v;
    }();
    CHECK(bytes.substr(0, 8) == "SIPSTATE");
    CHECK(bytes[8] == 1);
    const std::size_t reals = 50 * 30 + 30 + 50 * 8 + 8;
    CHECK(bytes.size() == 17 + header + 8 * reals);
    const auto h = nlohmann::json::parse(bytes.substr(17, header));
    CHECK(h["method"] == "netmf");
    CHECK(h["arrays"].size() == 4);
    CHECK(h["arrays"][0]["name"] == "U_h");
    CHECK(h["arrays"][0]["rows"] == 50);
    CHECK(h["arrays"][0]["cols"] == 30);
  }
  SUBCASE("GraRep keeps beta and one factor per order") {
    const FitResult f = fit(g, spec_for(Method::kGraRep));
    const FitResult back = decode_state(encode_state(f));
    const auto& a = std::get<GraRepBasis>(f.basis);
    const auto& b = std::get<GraRepBasis>(back.basis);
    CHECK(b.beta == a.beta);
    REQUIRE(b.V.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(same_bits(a.V[k], b.V[k]));
      CHECK(same_bits(a.sigma[k], b.sigma[k]));
    }
  }
}

TEST_CASE("corrupt state files are rejected") {
  const Graph g = oracle::random_connected_graph(30, 0.2, 6, true);
  const std::string good = encode_state(fit(g, spec_for(Method::kAROPE)));
  std::string bad = good;
  bad[0] = 'X';
  CHECK(code_of(bad) == ErrorCode::kParse);
  bad = good;
  bad[8] = 2;
  CHECK(code_of(bad) == ErrorCode::kParse);
  CHECK(code_of(good.substr(0, good.size() - 8)) == ErrorCode::kParse);
  CHECK(code_of(good + "x") == ErrorCode::kParse);
  CHECK(code_of(good.substr(0, 12)) == ErrorCode::kParse);
  CHECK(code_of("") == ErrorCode::kParse);
}

TEST_CASE("binding checks the initial graph") {
  const Graph g = oracle::random_connected_graph(40, 0.15, 2, true);
  FitResult back = decode_state(encode_state(fit(g, spec_for(Method::kNetMF))));
  // Unbound NetMF state cannot project.
  try {
    project_nodes(back, g, 30, 40);
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStaleState);
  }
  try {
    bind_graph(back, g.prefix(39));
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStaleState);
  }
  bind_graph(back, g);
  CHECK(std::get<NetMFBasis>(back.basis).degrees == g.degrees());
}

TEST_CASE("save and load through a file") {
  const Graph g = oracle::random_connected_graph(40, 0.15, 8, true);
  const FitResult f = fit(g, spec_for(Method::kLE));
  const auto path = std::filesystem::temp_directory_path() / "sip_state_test.bin";
  // A longer previous file must be fully replaced.
  {
    std::ofstream(path) << std::string(100000, 'z');
  }
  save_state(path.string(), f);
  const FitResult back = load_state(path.string());
  CHECK(encode_state(back) == encode_state(f));
  CHECK(std::filesystem::file_size(path) == encode_state(f).size());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_state(path.string()), Error);
}
