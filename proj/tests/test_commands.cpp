#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "sip/commands.hpp"
#include "sip/eval.hpp"
#include "sip/state_file.hpp"
#include "sip/synthetic.hpp"

using namespace sip;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("sip_cli_" + std::to_string(counter_++))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

void write_graph(const std::string& path, const Graph& g) {
  std::ofstream f(path);
  write_edge_list(f, g);
}

// Parses node_id,e_1..e_d back into tokens and values.
Matrix read_embedding(const std::string& path, std::vector<std::string>* tokens = nullptr) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string cell;
    std::getline(fields, cell, ',');
    if (tokens != nullptr) tokens->push_back(cell);
    rows.emplace_back();
    while (std::getline(fields, cell, ',')) rows.back().push_back(std::stod(cell));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace

TEST_CASE("fit is deterministic and matches the library") {
  TempDir dir;
  const Graph g = oracle::random_connected_graph(80, 0.08, 3, false);
  write_graph(dir.file("g.tsv"), g);
  for (std::string method : {"le", "arope", "grarep", "netmf"}) {
    CAPTURE(method);
    std::vector<std::string> args{"fit",
                                  "--input",
                                  dir.file("g.tsv"),
                                  "--method",
                                  method,
                                  "--dim",
                                  "8",
                                  "--n",
                                  "70",
                                  "--grarep-order",
                                  "2",
                                  "--netmf-rank",
                                  "32",
                                  "--state",
                                  dir.file("a.bin"),
                                  "--out",
                                  dir.file("a.csv")};
    REQUIRE(cli(args).code == 0);
    args[14] = dir.file("b.bin");
    args[16] = dir.file("b.csv");
    REQUIRE(cli(args).code == 0);
    CHECK(slurp(dir.file("a.bin")) == slurp(dir.file("b.bin")));
    CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));

    TargetSpec spec;
    spec.method = parse_method(method);
    spec.d = 8;
    spec.grarep_order = 2;
    spec.netmf_rank = 32;
    const FitResult ref = fit(g.prefix(70), spec);
    CHECK(slurp(dir.file("a.bin")) == encode_state(ref));
    std::vector<std::string> tokens;
    CHECK(read_embedding(dir.file("a.csv"), &tokens) == ref.embedding);
    CHECK(tokens.front() == "0");
    CHECK(tokens.back() == "69");
  }
}

TEST_CASE("generate matches the library and handles empty batches") {
  TempDir dir;
  const Graph full = oracle::random_connected_graph(60, 0.1, 5, false);
  write_graph(dir.file("g.tsv"), full.prefix(50));
  // Nodes 50..59 arrive; their edges toward each other and the first 50.
  std::ostringstream batch;
  for (const Edge& e : full.undirected_edges()) {
    if (std::max(e.src, e.dst) >= 50) batch << e.src << '\t' << e.dst << '\n';
  }
  write(dir.file("batch.tsv"), batch.str());
  write(dir.file("empty.tsv"), "# nothing\n");
  for (std::string method : {"le", "arope", "netmf"}) {
    CAPTURE(method);
    const std::vector<std::string> base{
        "--input", dir.file("g.tsv"), "--method", method,    "--dim",
        "6",       "--netmf-rank",    "40",       "--state", dir.file("s.bin")};
    auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
      head.insert(head.end(), base.begin(), base.end());
      head.insert(head.end(), tail.begin(), tail.end());
      return head;
    };
    REQUIRE(cli(with({"fit"}, {"--out", dir.file("e.csv")})).code == 0);

    const Run empty = cli(with(
        {"generate"}, {"--batch", dir.file("empty.tsv"), "--check", "--out", dir.file("n0.csv")}));
    REQUIRE(empty.code == 0);
    const auto j = nlohmann::json::parse(empty.out);
    CHECK(j["m"] == 0);
    CHECK(j["verdict"]["ok"] == true);
    CHECK(j["retrained"] == false);
    CHECK(slurp(dir.file("n0.csv")) == "node_id,e_1,e_2,e_3,e_4,e_5,e_6\n");

    const Run r =
        cli(with({"generate"}, {"--batch", dir.file("batch.tsv"), "--out", dir.file("n.csv")}));
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["verdict"].is_null());
    std::vector<std::string> tokens;
    const Matrix got = read_embedding(dir.file("n.csv"), &tokens);

    TargetSpec spec;
    spec.method = parse_method(method);
    spec.d = 6;
    spec.netmf_rank = 40;
    // New tokens are numbered by first appearance in the batch file.
    std::vector<NodeId> order(50);
    std::iota(order.begin(), order.end(), NodeId{0});
    for (const std::string& t : tokens) order.push_back(static_cast<NodeId>(std::stoul(t)));
    const Graph g1 = full.induced(order);
    const Matrix ref = generate(fit(full.prefix(50), spec), g1, false).embedding;
    CHECK(got == ref);
  }
}

TEST_CASE("generate with --check retrains on a heavy batch") {
  TempDir dir;
  write(dir.file("g.tsv"), "a\tb\nb\tc\nc\ta\nc\td\n");
  write(dir.file("batch.tsv"), "x\ta\nx\tb\nx\tc\nx\td\ny\tx\n");
  const std::vector<std::string> fit_args{
      "fit",     "--input",         dir.file("g.tsv"), "--method",       "le", "--dim", "2",
      "--state", dir.file("s.bin"), "--out",           dir.file("e.csv")};
  REQUIRE(cli(fit_args).code == 0);
  const std::vector<std::string> gen_args{
      "generate", "--input",        dir.file("g.tsv"), "--method", "le",
      "--check",  "--state",        dir.file("s.bin"), "--batch",  dir.file("batch.tsv"),
      "--out",    dir.file("n.csv")};
  const Run r = cli(gen_args);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["retrained"] == true);
  CHECK(j["verdict"]["ok"] == false);
  CHECK(load_state(dir.file("s.bin")).n == 6);
  // The rewritten state no longer matches the 4-node input.
  const Run stale = cli(gen_args);
  CHECK(stale.code != 0);
  CHECK(stale.err.rfind("E_STALE_STATE: ", 0) == 0);
}

TEST_CASE("threshold on the K2 arrival stream") {
  TempDir dir;
  std::string text = "a\tb\t1\n";
  for (int i = 0; i < 12; ++i) text += "a\tx" + std::to_string(i) + "\t0.4\n";
  write(dir.file("k2.tsv"), text);
  const Run r = cli({"threshold", "--input", dir.file("k2.tsv"), "--weighted", "--method", "le",
                     "--dim", "1", "--n", "2", "--m-max", "50"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["m0"] == 6);
  CHECK(j["capped"] == false);
  REQUIRE(j["trace"].size() == 7);
  for (std::size_t m = 1; m <= 7; ++m) {
    const auto& v = j["trace"][m - 1]["verdict"];
    CHECK(std::stod(v["lhs"].get<std::string>()) ==
          doctest::Approx(0.8 * std::sqrt(static_cast<double>(m))).epsilon(1e-9));
    CHECK(v["ok"] == (m <= 6));
  }
}

TEST_CASE("heatmap rows, marker and failed refits") {
  TempDir dir;
  write_graph(dir.file("g.tsv"), oracle::random_connected_graph(60, 0.1, 9, false));
  const Run r =
      cli({"heatmap", "--input", dir.file("g.tsv"), "--method", "arope", "--dim", "5", "--n", "50",
           "--m-max", "5", "--m-range", "0:20:5", "--out", dir.file("h.csv")});
  REQUIRE(r.code == 0);
  std::istringstream in(slurp(dir.file("h.csv")));
  std::string line;
  std::getline(in, line);
  CHECK(line == "m,eig_index,abs_correlation");
  std::map<int, std::vector<double>> rows;
  std::string marker;
  while (std::getline(in, line)) {
    if (line.rfind("m0,", 0) == 0) {
      marker = line;
      continue;
    }
    std::istringstream f(line);
    std::string m, idx, val;
    std::getline(f, m, ',');
    std::getline(f, idx, ',');
    std::getline(f, val, ',');
    rows[std::stoi(m)].push_back(std::stod(val));
    if (std::stoi(idx) == -1) CHECK(val == "nan");
  }
  REQUIRE(rows.size() == 5);
  for (double v : rows[0]) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rows[5].size() == 5);
  CHECK(rows[10].size() == 5);
  CHECK(rows[15].size() == 1);  // only 10 arrivals exist
  CHECK(std::isnan(rows[15][0]));
  CHECK(rows[20].size() == 1);
  const auto j = nlohmann::json::parse(cli({"threshold", "--input", dir.file("g.tsv"), "--method",
                                            "arope", "--dim", "5", "--n", "50", "--m-max", "5"})
                                           .out);
  CHECK(marker == "m0," + std::to_string(j["m0"].get<std::size_t>()) + ",");
}

TEST_CASE("bench emits three rows per n") {
  TempDir dir;
  const LabeledGraph lg = planted_partition(90, 3, 0.25, 0.02, 4);
  write_graph(dir.file("g.tsv"), lg.graph);
  std::ostringstream labels;
  for (std::size_t i = 0; i < 90; ++i) labels << i << "\tc" << lg.labels.assignments[i][0] << '\n';
  write(dir.file("l.tsv"), labels.str());
  const Run r = cli({"bench", "--input", dir.file("g.tsv"), "--labels", dir.file("l.tsv"),
                     "--method", "arope", "--dim", "6", "--n-range", "60:80:10", "--m-max", "5",
                     "--out", dir.file("b.csv")});
  REQUIRE(r.code == 0);
  std::istringstream in(slurp(dir.file("b.csv")));
  std::string line;
  std::size_t count = 0;
  std::getline(in, line);
  CHECK(line == "n,m0,mode,micro_f1,macro_f1,embed_time_s,embedding_hash");
  while (std::getline(in, line)) ++count;
  CHECK(count == 9);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["runs"].size() == 3);
  CHECK(j["evaluated"].get<std::size_t>() + j["skipped"].get<std::size_t>() == 3);
  CHECK(cli({"bench", "--input", dir.file("g.tsv"), "--method", "arope", "--n", "60", "--out",
             dir.file("x.csv")})
            .err.rfind("E_MISSING_DATA: ", 0) == 0);
}

TEST_CASE("errors are single coded lines") {
  TempDir dir;
  Run r = cli({"fit", "--input", dir.file("missing.tsv"), "--state", dir.file("s"), "--out",
               dir.file("o")});
  CHECK(r.code != 0);
  CHECK(r.err.rfind("E_IO: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  r = cli({"fit", "--bogus"});
  CHECK(r.code != 0);
  CHECK(r.err.rfind("E_USAGE: ", 0) == 0);
  write(dir.file("g.tsv"), "a\tb\nb\tc\n");
  r = cli({"fit", "--input", dir.file("g.tsv"), "--method", "deepwalk", "--state", dir.file("s"),
           "--out", dir.file("o")});
  CHECK(r.err.rfind("E_INVALID_ARGUMENT: ", 0) == 0);
  r = cli({"bench", "--input", dir.file("g.tsv"), "--n-range", "5:1:1", "--out", dir.file("o")});
  CHECK(r.err.rfind("E_INVALID_ARGUMENT: ", 0) == 0);
  CHECK(cli({}).code != 0);
}
