#include "sip/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "sip/error.hpp"
#include "sip/eval.hpp"
#include "sip/state_file.hpp"

namespace sip {

namespace {

using nlohmann::json;

struct Options {
  std::string input;
  std::string labels;
  std::string method = "arope";
  std::size_t dim = 128;
  std::size_t n = 0;  // 0: every node of the input
  std::string n_range;
  std::string m_range;
  std::string batch;
  bool check = false;
  bool weighted = false;
  bool shuffle = false;
  std::size_t m_max = 100;
  std::uint64_t seed = 42;
  std::string state;
  std::string out;
  std::size_t grarep_order = 4;
  std::size_t netmf_rank = 256;
  std::size_t netmf_window = 10;
};

struct Range {
  std::size_t start = 0, stop = 0, step = 1;
  std::vector<std::size_t> values() const {
    std::vector<std::size_t> v;
    for (std::size_t x = start; x <= stop; x += step) v.push_back(x);
    return v;
  }
};

Range parse_range(const std::string& text, const std::string& flag) {
  Range r;
  char sep1 = 0, sep2 = 0;
  std::istringstream in(text);
  if (!(in >> r.start >> sep1 >> r.stop >> sep2 >> r.step) || sep1 != ':' || sep2 != ':' ||
      !in.eof() || r.step == 0 || r.stop < r.start) {
    throw Error(ErrorCode::kInvalidArgument, flag + " expects start:stop:step, got '" + text + "'");
  }
  return r;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

TargetSpec make_spec(const Options& o) {
  TargetSpec s;
  s.method = parse_method(o.method);
  s.d = o.dim;
  s.grarep_order = o.grarep_order;
  s.netmf_rank = o.netmf_rank;
  s.netmf_window = o.netmf_window;
  s.eig.seed = o.seed;
  s.validate();
  return s;
}

NormOptions norm_options(const Options& o) {
  NormOptions n;
  n.seed = o.seed;
  return n;
}

struct Workspace {
  LoadedGraph loaded;
  StreamScenario scenario;
};

Workspace load(const Options& o, std::size_t n, bool need_labels) {
  if (o.input.empty()) throw Error(ErrorCode::kInvalidArgument, "--input is required");
  Workspace w;
  w.loaded = load_edge_list_file(o.input, o.weighted);
  const std::size_t total = w.loaded.graph.num_nodes();
  LabelTable labels;
  if (need_labels) {
    if (o.labels.empty()) throw Error(ErrorCode::kMissingData, "--labels is required");
    labels = load_labels_file(o.labels, w.loaded.ids, total);
  }
  ArrivalOrder order;
  order.kind = o.shuffle ? ArrivalOrder::Kind::kShuffled : ArrivalOrder::Kind::kFileOrder;
  order.seed = o.seed;
  w.scenario =
      make_scenario(w.loaded.graph, n == 0 ? total : n, order, 1, need_labels ? &labels : nullptr);
  return w;
}

const std::string& token_of(const Workspace& w, std::size_t position) {
  return w.loaded.tokens[w.scenario.order[position]];
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path);
  return f;
}

void write_embedding(std::ostream& os, const Matrix& e, const std::vector<std::string>& tokens) {
  os << "node_id";
  for (Eigen::Index j = 0; j < e.cols(); ++j) os << ",e_" << j + 1;
  os << '\n';
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    os << tokens[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < e.cols(); ++j) os << ',' << fmt(e(i, j));
    os << '\n';
  }
}

void emit(std::ostream& out, const std::string& path, const json& j) {
  if (path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    auto f = open_out(path);
    f << j.dump(2) << '\n';
  }
}

int cmd_fit(const Options& o, std::ostream& out) {
  const TargetSpec spec = make_spec(o);
  if (o.state.empty() || o.out.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "fit needs --state and --out");
  }
  const Workspace w = load(o, o.n, false);
  const FitResult f = fit(w.scenario.initial, spec);
  save_state(o.state, f);
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < f.n; ++i) tokens.push_back(token_of(w, i));
  auto csv = open_out(o.out);
  write_embedding(csv, f.embedding, tokens);
  out << json{{"method", method_name(spec.method)},
              {"n", f.n},
              {"d", spec.d},
              {"seed", o.seed},
              {"sigma1", fmt(f.spectrum.sigma1)},
              {"sigma2", fmt(f.spectrum.sigma2)}}
             .dump(2)
      << '\n';
  return 0;
}

// Batch lines are "a b [w]"; tokens outside the initial graph are new nodes,
// numbered by first appearance.
Graph apply_batch_file(const Workspace& w, const std::string& path, bool weighted,
                       std::vector<std::string>& new_tokens) {
  const Graph& g0 = w.scenario.initial;
  const std::size_t n = g0.num_nodes();
  std::unordered_map<std::string, NodeId> ids;
  for (std::size_t i = 0; i < n; ++i) ids.emplace(token_of(w, i), static_cast<NodeId>(i));
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::vector<Edge> edges = g0.undirected_edges();
  auto id_of = [&](const std::string& t) {
    auto [it, inserted] = ids.emplace(t, static_cast<NodeId>(n + new_tokens.size()));
    if (inserted) new_tokens.push_back(t);
    return it->second;
  };
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string a, b;
    double weight = 1.0;
    if (!(fields >> a >> b)) {
      throw Error(ErrorCode::kParse, path + ":" + std::to_string(lineno) + ": expected two tokens");
    }
    if (weighted && !(fields >> weight)) {
      throw Error(ErrorCode::kParse, path + ":" + std::to_string(lineno) + ": missing weight");
    }
    const NodeId u = id_of(a), v = id_of(b);
    if (u != v) edges.push_back({u, v, weight});
  }
  return Graph::from_edges(n + new_tokens.size(), edges);
}

int cmd_generate(const Options& o, std::ostream& out) {
  if (o.state.empty() || o.out.empty() || o.batch.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "generate needs --state, --batch and --out");
  }
  FitResult model = load_state(o.state);
  if (method_name(model.spec.method) != o.method) {
    throw Error(ErrorCode::kStaleState, "state holds a " + method_name(model.spec.method) +
                                            " basis, --method is " + o.method);
  }
  const Workspace w = load(o, o.n, false);
  bind_graph(model, w.scenario.initial);
  std::vector<std::string> new_tokens;
  const Graph g1 = apply_batch_file(w, o.batch, o.weighted, new_tokens);
  const GenerateResult r = generate(model, w.scenario.initial, g1, o.check, norm_options(o));
  auto csv = open_out(o.out);
  write_embedding(csv, r.embedding, new_tokens);
  if (r.refit) save_state(o.state, *r.refit);
  out << json{{"n", model.n},
              {"m", new_tokens.size()},
              {"seed", o.seed},
              {"retrained", r.retrained},
              {"state_rewritten", r.refit.has_value()},
              {"verdict", r.verdict ? to_json(*r.verdict) : json(nullptr)}}
             .dump(2)
      << '\n';
  return 0;
}

int cmd_threshold(const Options& o, std::ostream& out) {
  const TargetSpec spec = make_spec(o);
  const Workspace w = load(o, o.n, false);
  const ThresholdResult t = restart_threshold(w.scenario, spec, o.m_max, norm_options(o));
  json trace = json::array();
  for (const ThresholdStep& s : t.trace)
    trace.push_back({{"m", s.m}, {"verdict", to_json(s.verdict)}});
  emit(out, o.out,
       {{"method", method_name(spec.method)},
        {"n", w.scenario.initial.num_nodes()},
        {"seed", o.seed},
        {"m0", t.m0},
        {"capped", t.capped},
        {"cap", t.cap},
        {"sigma1", fmt(t.spectrum.sigma1)},
        {"sigma2", fmt(t.spectrum.sigma2)},
        {"trace", trace}});
  return 0;
}

int cmd_heatmap(const Options& o, std::ostream& out) {
  const TargetSpec spec = make_spec(o);
  const Workspace w = load(o, o.n, false);
  const ThresholdResult t = restart_threshold(w.scenario, spec, o.m_max, norm_options(o));
  const std::vector<std::size_t> grid =
      o.m_range.empty() ? Range{0, o.m_max, std::max<std::size_t>(1, o.m_max / 10)}.values()
                        : parse_range(o.m_range, "--m-range").values();
  const std::vector<HeatmapRow> rows = correlation_heatmap(w.scenario, spec, grid);
  std::ostringstream csv;
  csv << "m,eig_index,abs_correlation\n";
  for (const HeatmapRow& r : rows) {
    if (r.failed) {
      csv << r.m << ",-1,nan\n";
      continue;
    }
    for (std::size_t j = 0; j < r.correlation.size(); ++j) {
      csv << r.m << ',' << j << ',' << fmt(r.correlation[j]) << '\n';
    }
  }
  csv << "m0," << t.m0 << ",\n";
  if (o.out.empty()) {
    out << csv.str();
  } else {
    open_out(o.out) << csv.str();
  }
  return 0;
}

int cmd_bench(const Options& o, std::ostream& out) {
  const TargetSpec spec = make_spec(o);
  if (o.out.empty()) throw Error(ErrorCode::kInvalidArgument, "bench needs --out");
  const std::vector<std::size_t> sweep = o.n_range.empty()
                                             ? std::vector<std::size_t>{o.n}
                                             : parse_range(o.n_range, "--n-range").values();
  TrainConfig train;
  train.seed = o.seed;
  std::vector<ModesResult> runs;
  std::ostringstream csv;
  csv << "n,m0,mode,micro_f1,macro_f1,embed_time_s,embedding_hash\n";
  json per_n = json::array();
  for (std::size_t n : sweep) {
    if (n == 0) throw Error(ErrorCode::kInvalidArgument, "bench needs a positive n");
    const Workspace w = load(o, n, true);
    const ThresholdResult t = restart_threshold(w.scenario, spec, o.m_max, norm_options(o));
    ModesResult r = run_modes(w.scenario, spec, t.m0, train);
    for (EvalMode mode :
         {EvalMode::kSipKeepModel, EvalMode::kRetrainEmbedKeepModel, EvalMode::kRetrainBoth}) {
      csv << n << ',' << t.m0 << ',' << mode_name(mode);
      if (r.skipped) {
        csv << ",nan,nan,nan,\n";
        continue;
      }
      const EvalReport& e = r.reports[static_cast<std::size_t>(mode)];
      csv << ',' << fmt(e.micro_f1) << ',' << fmt(e.macro_f1) << ',' << fmt(e.embed_time_s) << ','
          << e.embedding_hash << '\n';
    }
    per_n.push_back(to_json(r));
    runs.push_back(std::move(r));
  }
  open_out(o.out) << csv.str();
  json summary = to_json(aggregate(runs));
  summary["method"] = method_name(spec.method);
  summary["seed"] = o.seed;
  summary["runs"] = per_n;
  out << summary.dump(2) << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Space-invariant projection for streaming network embedding", "sip"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* c) {
    c->add_option("--input", o.input, "Edge list (src dst [w])");
    c->add_option("--method", o.method, "le | arope | grarep | netmf");
    c->add_option("--dim", o.dim, "Embedding dimension");
    c->add_option("--n", o.n, "Initial nodes (default: all)");
    c->add_option("--seed", o.seed, "Seed for every random draw");
    c->add_option("--out", o.out, "Output path");
    c->add_option("--grarep-order", o.grarep_order);
    c->add_option("--netmf-rank", o.netmf_rank);
    c->add_option("--netmf-window", o.netmf_window);
    c->add_flag("--weighted", o.weighted, "Read a third weight column");
    c->add_flag("--shuffle", o.shuffle, "Seeded random arrival order instead of file order");
  };
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a basis and write the initial embedding");
  common(fit_cmd);
  fit_cmd->add_option("--state", o.state, "State file to write");
  CLI::App* gen_cmd = app.add_subcommand("generate", "Embed a batch of new nodes");
  common(gen_cmd);
  gen_cmd->add_option("--state", o.state, "State file from fit");
  gen_cmd->add_option("--batch", o.batch, "Batch edge list");
  gen_cmd->add_flag("--check", o.check, "Run the drift check and retrain when it fails");
  CLI::App* thr_cmd =
      app.add_subcommand("threshold", "Largest arrival count passing the drift check");
  common(thr_cmd);
  thr_cmd->add_option("--m-max", o.m_max, "Scan limit");
  CLI::App* heat_cmd = app.add_subcommand("heatmap", "Eigenvector prefix correlation vs arrivals");
  common(heat_cmd);
  heat_cmd->add_option("--m-max", o.m_max, "Scan limit for m0");
  heat_cmd->add_option("--m-range", o.m_range, "Grid start:stop:step");
  CLI::App* bench_cmd = app.add_subcommand("bench", "Node classification in three modes");
  common(bench_cmd);
  bench_cmd->add_option("--labels", o.labels, "node<TAB>label file");
  bench_cmd->add_option("--n-range", o.n_range, "Sweep start:stop:step");
  bench_cmd->add_option("--m-max", o.m_max, "Scan limit for m0");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "E_USAGE: " << e.what() << '\n';
    return 2;
  }
  try {
    if (fit_cmd->parsed()) return cmd_fit(o, out);
    if (gen_cmd->parsed()) return cmd_generate(o, out);
    if (thr_cmd->parsed()) return cmd_threshold(o, out);
    if (heat_cmd->parsed()) return cmd_heatmap(o, out);
    return cmd_bench(o, out);
  } catch (const Error& e) {
    err << error_code_name(e.code()) << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "E_INTERNAL: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace sip
