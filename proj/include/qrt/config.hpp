#pragma once

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qrt/dynamics.hpp"
#include "qrt/io.hpp"

namespace qrt {

using Json = nlohmann::json;

// Experiment configuration. Two encodings of the same schema are accepted:
// a dotted key = value text file and plain JSON. Values in the text format
// are JSON fragments (numbers, [..] arrays) or bare words; comma-separated
// bare words become string arrays. Complex matrix entries are [re, im]
// pairs.
namespace config {

inline bool looks_like_json(const std::string& text) {
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    return c == '{';
  }
  return false;
}

inline Json parse_value(const std::string& raw) {
  std::string v = raw;
  const auto a = v.find_first_not_of(" \t");
  const auto b = v.find_last_not_of(" \t");
  if (a == std::string::npos) throw Error("ConfigParse", "empty value");
  v = v.substr(a, b - a + 1);
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[' || v.front() == '"') {
    Json j = Json::parse(v, nullptr, false);
    if (j.is_discarded()) throw Error("ConfigParse", "bad array/string value: " + v);
    return j;
  }
  // number?
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (...) {
  }
  // comma-separated bare words become a string list
  if (v.find(',') != std::string::npos) {
    Json arr = Json::array();
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      const auto x = tok.find_first_not_of(" \t");
      const auto y = tok.find_last_not_of(" \t");
      if (x != std::string::npos) arr.push_back(tok.substr(x, y - x + 1));
    }
    return arr;
  }
  return v;
}

inline void set_path(Json& root, const std::string& dotted, Json value) {
  Json* node = &root;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);
  (*node)[parts.back()] = std::move(value);
}

inline Json parse_text(const std::string& text) {
  Json root = Json::object();
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("ConfigParse",
                  "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = line.substr(0, eq);
    const auto ka = key.find_first_not_of(" \t");
    const auto kb = key.find_last_not_of(" \t");
    key = key.substr(ka, kb - ka + 1);
    set_path(root, key, parse_value(line.substr(eq + 1)));
  }
  return root;
}

inline Json parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("ConfigParse", "cannot read config file " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();
  if (looks_like_json(text)) {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error("ConfigParse", "invalid JSON in " + path);
    return j;
  }
  return parse_text(text);
}

// sorted dotted-key rendering; re-parsing the dump yields the same tree
inline void dump_flat(const Json& node, const std::string& prefix,
                      std::vector<std::string>* lines) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it)
      dump_flat(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(),
                lines);
  } else {
    lines->push_back(prefix + " = " + node.dump());
  }
}

inline std::string dump_normalized(const Json& root) {
  std::vector<std::string> lines;
  dump_flat(root, "", &lines);
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

inline uint64_t hash_config(const Json& root) {
  const std::string s = dump_normalized(root);
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline ComplexMatrix parse_matrix(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty())
    throw Error("ValidationError", path + ": expected a matrix of rows");
  const size_t n = j.size();
  ComplexMatrix m(n, n);
  for (size_t r = 0; r < n; ++r) {
    if (!j[r].is_array() || j[r].size() != n)
      throw Error("ValidationError", path + ": matrix must be square");
    for (size_t c = 0; c < n; ++c) {
      const Json& e = j[r][c];
      if (e.is_number())
        m(r, c) = e.get<double>();
      else if (e.is_array() && e.size() == 2)
        m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
      else
        throw Error("ValidationError",
                    path + ": entries are numbers or [re, im] pairs");
    }
  }
  return m;
}

inline void collect_leaf_paths(const Json& node, const std::string& prefix,
                               std::vector<std::string>* out) {
  if (node.is_object() && !node.empty()) {
    for (auto it = node.begin(); it != node.end(); ++it)
      collect_leaf_paths(it.value(),
                         prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out->push_back(prefix);
  }
}

// Every leaf path must match a known key exactly or fall under a ".*"
// wildcard subtree; the first offender is named in the error.
inline void check_known_keys(const Json& root, const std::string& unused,
                             const std::set<std::string>& known) {
  (void)unused;
  std::vector<std::string> leaves;
  collect_leaf_paths(root, "", &leaves);
  for (const auto& path : leaves) {
    bool ok = known.count(path) > 0;
    if (!ok)
      for (const auto& k : known)
        if (k.size() > 2 && k.substr(k.size() - 2) == ".*" &&
            path.rfind(k.substr(0, k.size() - 1), 0) == 0) {
          ok = true;
          break;
        }
    if (!ok) throw Error("ValidationError", "unknown config key '" + path + "'");
  }
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "system.builder", "system.omega0", "system.L", "system.J", "system.h",
      "system.periodic", "system.dim", "system.H0", "system.N", "system.phi.*",
      "system.j_init", "system.parity", "system.basis_real",
      "ensemble.beta", "ensemble.mu",
      "protocol.t_i", "protocol.t_f", "protocol.steps", "protocol.channel.*",
      "tasks", "task.*",
      "output.dir", "output.format",
      "seed", "tolerance_profile"};
  return keys;
}

}  // namespace config

// Everything a task needs: the built system, ensemble, protocol, parities
// and output policy.
struct ExperimentContext {
  Json cfg;
  SystemSpec spec;
  TimeParity parity;
  double beta = 1.0, mu = 0.0;
  DriveProtocol protocol;
  int steps = 2000;
  bool has_protocol = false;
  std::string out_dir = ".";
  std::string format = "csv";
  uint64_t seed = 12345;
  ToleranceProfile tols = tolerance_profile("strict");

  std::map<std::string, std::string> metadata(const std::string& extra = "") const {
    std::map<std::string, std::string> md;
    md["tool"] = "qrt 0.1.0";
    Json science = cfg;  // where results go does not change what they are
    science.erase("output");
    md["config_hash"] = std::to_string(config::hash_config(science));
    md["fourier_sign"] = "exp(-i omega t)";
    md["heisenberg_phase"] = "exp(+i omega_j (t - t_i)) on bras";
    md["metric"] = "mostly-plus (-,+,+,+)";
    md["tolerance_profile"] = tols.name;
    if (!extra.empty()) md["note"] = extra;
    return md;
  }
};

namespace config {

inline SystemSpec build_system(const Json& sys) {
  const std::string builder = sys.value("builder", "qubit");
  if (builder == "qubit") return build_qubit(sys.value("omega0", 1.0));
  if (builder == "transverse_ising")
    return build_transverse_ising(sys.value("L", 3), sys.value("J", 1.0),
                                  sys.value("h", 0.5), sys.value("periodic", false));
  if (builder == "custom") {
    if (!sys.contains("dim") || !sys.contains("H0"))
      throw Error("ValidationError", "custom system needs system.dim and system.H0");
    SystemSpec spec;
    spec.dim = sys["dim"].get<Eigen::Index>();
    spec.H0 = HermitianOperator(parse_matrix(sys["H0"], "system.H0"));
    spec.N_op = sys.contains("N")
                    ? HermitianOperator(parse_matrix(sys["N"], "system.N"))
                    : HermitianOperator::zero(spec.dim);
    if (sys.contains("phi"))
      for (auto it = sys["phi"].begin(); it != sys["phi"].end(); ++it) {
        spec.phi.emplace_back(parse_matrix(it.value(), "system.phi." + it.key()));
        spec.labels.push_back(it.key());
      }
    if (spec.phi.empty())
      throw Error("ValidationError", "custom system needs at least one coupling");
    spec.j_init = RealVector::Zero(spec.n_sources());
    if (sys.contains("j_init")) {
      const Json& j = sys["j_init"];
      if (static_cast<int>(j.size()) != spec.n_sources())
        throw Error("ValidationError", "system.j_init length mismatch");
      for (int i = 0; i < spec.n_sources(); ++i) spec.j_init[i] = j[size_t(i)];
    }
    spec.validate();
    return spec;
  }
  throw Error("ValidationError", "unknown system.builder '" + builder + "'");
}

inline DriveChannel build_channel(const Json& ch, const std::string& path) {
  const std::string form = ch.value("form", "constant");
  if (form == "constant") return DriveChannel::constant(ch.value("value", 0.0));
  if (form == "step")
    return DriveChannel::step(ch.value("before", 0.0), ch.value("after", 0.0),
                              ch.value("at", 0.0));
  if (form == "ramp") return DriveChannel::ramp(ch.value("from", 0.0), ch.value("to", 0.0));
  if (form == "gaussian")
    return DriveChannel::gaussian(ch.value("base", 0.0), ch.value("amplitude", 0.1),
                                  ch.value("center", 0.0), ch.value("width", 1.0));
  if (form == "sinusoid")
    return DriveChannel::sinusoid(ch.value("base", 0.0), ch.value("amplitude", 0.1),
                                  ch.value("omega", 1.0), ch.value("phase", 0.0));
  if (form == "tabulated") {
    std::vector<double> tt, vv;
    for (const auto& x : ch.value("times", Json::array())) tt.push_back(x);
    for (const auto& x : ch.value("values", Json::array())) vv.push_back(x);
    return DriveChannel::tabulated(tt, vv);
  }
  throw Error("ValidationError", path + ": unknown channel form '" + form + "'");
}

inline ExperimentContext build_context(const Json& cfg) {
  check_known_keys(cfg, "", known_keys());
  ExperimentContext ctx;
  ctx.cfg = cfg;
  ctx.spec = build_system(cfg.value("system", Json::object()));
  const Json ens = cfg.value("ensemble", Json::object());
  ctx.beta = ens.value("beta", 1.0);
  ctx.mu = ens.value("mu", 0.0);

  ctx.parity = TimeParity::all_even(ctx.spec.n_sources(), false);
  const Json sys = cfg.value("system", Json::object());
  if (sys.contains("basis_real")) ctx.parity.basis_real = sys["basis_real"];
  if (sys.contains("parity")) {
    const Json& par = sys["parity"];
    if (static_cast<int>(par.size()) != ctx.spec.n_sources())
      throw Error("ValidationError", "system.parity length mismatch");
    for (size_t i = 0; i < par.size(); ++i) ctx.parity.eps[i] = par[i];
  }

  ctx.protocol.t_i = 0.0;
  ctx.protocol.t_f = 10.0;
  for (int n = 0; n < ctx.spec.n_sources(); ++n)
    ctx.protocol.channels.push_back(DriveChannel::constant(ctx.spec.j_init[n]));
  if (cfg.contains("protocol")) {
    const Json& pr = cfg["protocol"];
    ctx.has_protocol = true;
    ctx.protocol.t_i = pr.value("t_i", 0.0);
    ctx.protocol.t_f = pr.value("t_f", 10.0);
    ctx.steps = pr.value("steps", 2000);
    if (pr.contains("channel"))
      for (auto it = pr["channel"].begin(); it != pr["channel"].end(); ++it) {
        const int idx = std::stoi(it.key());
        if (idx < 0 || idx >= ctx.spec.n_sources())
          throw Error("ValidationError", "protocol.channel." + it.key() +
                                             " is out of range");
        ctx.protocol.channels[static_cast<size_t>(idx)] =
            build_channel(it.value(), "protocol.channel." + it.key());
      }
  }

  const Json out = cfg.value("output", Json::object());
  ctx.out_dir = out.value("dir", ".");
  ctx.format = out.value("format", "csv");
  if (ctx.format != "csv" && ctx.format != "json")
    throw Error("ValidationError", "output.format must be csv or json");
  ctx.seed = cfg.value("seed", 12345);
  ctx.tols = tolerance_profile(cfg.value("tolerance_profile", "strict"));
  return ctx;
}

}  // namespace config
}  // namespace qrt
