#include "sip/state_file.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <array>
#include <bit>
#include <cerrno>
#include <cstring>
#include <vector>

#include "json.hpp"
#include "sip/error.hpp"

namespace sip {

namespace {

using Index = Eigen::Index;
using nlohmann::json;

constexpr std::string_view kMagic = "SIPSTATE";
constexpr unsigned char kVersion = 0x01;

struct Array {
  std::string name;
  Matrix data;
};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

Matrix column(const Vector& v) { return Matrix(v); }

Vector as_vector(const Matrix& m) { return m.col(0); }

json spec_json(const TargetSpec& s) {
  return {{"arope_weights", s.arope_weights},
          {"grarep_order", s.grarep_order},
          {"grarep_beta", s.grarep_beta},
          {"netmf_rank", s.netmf_rank},
          {"netmf_window", s.netmf_window},
          {"netmf_negative", s.netmf_negative},
          {"allow_isolated", s.allow_isolated},
          {"eig",
           {{"tol", s.eig.tol},
            {"max_restarts", s.eig.max_restarts},
            {"seed", s.eig.seed},
            {"block_size", s.eig.block_size},
            {"max_basis", s.eig.max_basis}}}};
}

TargetSpec spec_from(const json& h) {
  TargetSpec s;
  s.method = parse_method(h.at("method").get<std::string>());
  s.d = h.at("d").get<std::size_t>();
  const json& p = h.at("params");
  s.arope_weights = p.at("arope_weights").get<std::vector<double>>();
  s.grarep_order = p.at("grarep_order").get<std::size_t>();
  s.grarep_beta = p.at("grarep_beta").get<double>();
  s.netmf_rank = p.at("netmf_rank").get<std::size_t>();
  s.netmf_window = p.at("netmf_window").get<std::size_t>();
  s.netmf_negative = p.at("netmf_negative").get<double>();
  s.allow_isolated = p.at("allow_isolated").get<bool>();
  const json& e = p.at("eig");
  s.eig.tol = e.at("tol").get<double>();
  s.eig.max_restarts = e.at("max_restarts").get<std::size_t>();
  s.eig.seed = e.at("seed").get<std::uint64_t>();
  s.eig.block_size = e.at("block_size").get<std::size_t>();
  s.eig.max_basis = e.at("max_basis").get<std::size_t>();
  return s;
}

std::vector<Array> basis_arrays(const MethodBasis& basis, json& extra) {
  std::vector<Array> out;
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, LEBasis>) {
          out.push_back({"U", b.U});
          out.push_back({"lambda", column(b.lambda)});
          out.push_back({"sigma_clamped", column(b.sigma_clamped)});
        } else if constexpr (std::is_same_v<T, AROPEBasis>) {
          out.push_back({"V", b.V});
          out.push_back({"sigma", column(b.sigma)});
        } else if constexpr (std::is_same_v<T, GraRepBasis>) {
          for (std::size_t k = 0; k < b.V.size(); ++k) {
            out.push_back({"V" + std::to_string(k + 1), b.V[k]});
            out.push_back({"sigma" + std::to_string(k + 1), column(b.sigma[k])});
          }
          extra["beta"] = b.beta;
        } else {
          out.push_back({"U_h", b.U_h});
          out.push_back({"lambda_h", column(b.lambda_h)});
          out.push_back({"V", b.V});
          out.push_back({"sigma", column(b.sigma)});
          extra["vol"] = b.vol;
        }
      },
      basis);
  return out;
}

[[noreturn]] void corrupt(const std::string& what) {
  throw Error(ErrorCode::kParse, "state file: " + what);
}

const Matrix& find(const std::vector<Array>& arrays, const std::string& name) {
  for (const Array& a : arrays) {
    if (a.name == name) return a.data;
  }
  corrupt("missing array " + name);
}

MethodBasis basis_from(const TargetSpec& spec, const json& h, const std::vector<Array>& a) {
  switch (spec.method) {
    case Method::kLE:
      return LEBasis{find(a, "U"), as_vector(find(a, "lambda")),
                     as_vector(find(a, "sigma_clamped"))};
    case Method::kAROPE:
      return AROPEBasis{find(a, "V"), as_vector(find(a, "sigma"))};
    case Method::kGraRep: {
      GraRepBasis b;
      for (std::size_t k = 1; k <= spec.grarep_order; ++k) {
        b.V.push_back(find(a, "V" + std::to_string(k)));
        b.sigma.push_back(as_vector(find(a, "sigma" + std::to_string(k))));
      }
      b.beta = h.at("beta").get<double>();
      return b;
    }
    case Method::kNetMF: {
      NetMFBasis b;
      b.U_h = find(a, "U_h");
      b.lambda_h = as_vector(find(a, "lambda_h"));
      b.V = find(a, "V");
      b.sigma = as_vector(find(a, "sigma"));
      b.vol = h.at("vol").get<double>();
      b.window = spec.netmf_window;
      b.negative = spec.netmf_negative;
      return b;
    }
  }
  corrupt("unknown method");
}

class Fd {
 public:
  Fd(const std::string& path, int flags) : fd_(::open(path.c_str(), flags, 0644)) {
    if (fd_ < 0) throw Error(ErrorCode::kIo, path + ": " + std::strerror(errno));
  }
  ~Fd() { ::close(fd_); }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

}  // namespace

std::string encode_state(const FitResult& model) {
  json h;
  h["method"] = method_name(model.spec.method);
  h["n"] = model.n;
  h["d"] = model.spec.d;
  h["params"] = spec_json(model.spec);
  h["sigma1"] = model.spectrum.sigma1;
  h["sigma2"] = model.spectrum.sigma2;
  const std::vector<Array> arrays = basis_arrays(model.basis, h);
  json desc = json::array();
  for (const Array& a : arrays) {
    desc.push_back({{"name", a.name}, {"rows", a.data.rows()}, {"cols", a.data.cols()}});
  }
  h["arrays"] = desc;
  const std::string header = h.dump();

  std::string out(kMagic);
  out.push_back(static_cast<char>(kVersion));
  put_u64(out, header.size());
  out += header;
  for (const Array& a : arrays) {
    for (Index i = 0; i < a.data.rows(); ++i) {
      for (Index j = 0; j < a.data.cols(); ++j)
        put_u64(out, std::bit_cast<std::uint64_t>(a.data(i, j)));
    }
  }
  return out;
}

FitResult decode_state(std::string_view bytes) {
  const std::size_t prefix = kMagic.size() + 1 + 8;
  if (bytes.size() < prefix || bytes.substr(0, kMagic.size()) != kMagic) corrupt("bad magic");
  if (static_cast<unsigned char>(bytes[kMagic.size()]) != kVersion) {
    corrupt("unsupported version " +
            std::to_string(static_cast<unsigned char>(bytes[kMagic.size()])));
  }
  const std::uint64_t header_len = get_u64(bytes, kMagic.size() + 1);
  if (header_len > bytes.size() - prefix) corrupt("truncated header");
  json h;
  try {
    h = json::parse(bytes.substr(prefix, header_len));
  } catch (const json::exception& e) {
    corrupt(std::string("header: ") + e.what());
  }

  FitResult model;
  std::vector<Array> arrays;
  try {
    model.spec = spec_from(h);
    model.n = h.at("n").get<std::size_t>();
    model.spectrum.sigma1 = h.at("sigma1").get<double>();
    model.spectrum.sigma2 = h.at("sigma2").get<double>();
    std::size_t at = prefix + header_len;
    for (const json& d : h.at("arrays")) {
      const auto rows = d.at("rows").get<std::size_t>();
      const auto cols = d.at("cols").get<std::size_t>();
      if (cols != 0 && rows > (bytes.size() - at) / 8 / cols) corrupt("truncated arrays");
      Array a{d.at("name").get<std::string>(),
              Matrix(static_cast<Index>(rows), static_cast<Index>(cols))};
      for (Index i = 0; i < a.data.rows(); ++i) {
        for (Index j = 0; j < a.data.cols(); ++j) {
          a.data(i, j) = std::bit_cast<double>(get_u64(bytes, at));
          at += 8;
        }
      }
      arrays.push_back(std::move(a));
    }
    if (at != bytes.size()) corrupt("trailing bytes after arrays");
    model.basis = basis_from(model.spec, h, arrays);
  } catch (const json::exception& e) {
    corrupt(std::string("header field: ") + e.what());
  }
  return model;
}

void bind_graph(FitResult& model, const Graph& g0) {
  if (g0.num_nodes() != model.n) {
    throw Error(ErrorCode::kStaleState, "state was fit on " + std::to_string(model.n) +
                                            " nodes, graph has " + std::to_string(g0.num_nodes()));
  }
  if (auto* b = std::get_if<NetMFBasis>(&model.basis)) b->degrees = g0.degrees();
}

void save_state(const std::string& path, const FitResult& model) {
  const std::string bytes = encode_state(model);
  Fd fd(path, O_WRONLY | O_CREAT);
  if (::flock(fd.get(), LOCK_EX) != 0 || ::ftruncate(fd.get(), 0) != 0) {
    throw Error(ErrorCode::kIo, path + ": " + std::strerror(errno));
  }
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t w = ::write(fd.get(), bytes.data() + done, bytes.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, path + ": " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(w);
  }
}

FitResult load_state(const std::string& path) {
  Fd fd(path, O_RDONLY);
  if (::flock(fd.get(), LOCK_SH) != 0)
    throw Error(ErrorCode::kIo, path + ": " + std::strerror(errno));
  std::string bytes;
  std::array<char, 1 << 16> buf;
  for (;;) {
    const ssize_t r = ::read(fd.get(), buf.data(), buf.size());
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, path + ": " + std::strerror(errno));
    }
    if (r == 0) break;
    bytes.append(buf.data(), static_cast<std::size_t>(r));
  }
  return decode_state(bytes);
}

}  // namespace sip
