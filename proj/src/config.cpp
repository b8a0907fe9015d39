#include "rds/config.hpp"

#include "rds/systems.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace rds {

using nlohmann::json;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) return d;
  }
  throw ConfigError(field + ": expected a real number or hex-float string, got " + v.dump());
}

namespace {

json hex(double v) { return hex_double(v); }

json hex_matrix(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(hex(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

json hex_vector(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(hex(x));
  return out;
}

// Strict reader over one JSON object: tracks the keys it consumed and
// rejects any it did not.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void real(const char* key, double& out) {
    if (has(key)) out = parse_double(raw(key), path(key));
  }
  void optional_real(const char* key, std::optional<double>& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (v.is_null()) {
      out.reset();
    } else {
      out = parse_double(v, path(key));
    }
  }
  template <class Int>
  void integer(const char* key, Int& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(path(key) + ": expected an integer, got " + v.dump());
    out = v.get<Int>();
  }
  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true or false");
    out = v.get<bool>();
  }
  void string(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
    out = v.get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path(it.key().c_str()) + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Matrix read_matrix(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) throw ConfigError(field + ": expected a non-empty array of rows");
  const std::size_t cols = v.front().is_array() ? v.front().size() : 0;
  if (cols == 0) throw ConfigError(field + ": rows must be non-empty arrays");
  Matrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (!v[r].is_array() || v[r].size() != cols) throw ConfigError(field + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(v[r][c], field + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return m;
}

std::vector<double> read_reals(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field + ": expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(parse_double(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

Quadrature parse_quadrature(const std::string& s) {
  if (s == "left_point") return Quadrature::LeftPoint;
  if (s == "euler_consistent") return Quadrature::EulerConsistent;
  throw ConfigError("quadrature: expected left_point or euler_consistent, got '" + s + "'");
}

Side parse_side(const std::string& s) {
  if (s == "stable") return Side::Stable;
  if (s == "unstable") return Side::Unstable;
  throw ConfigError("manifold.side: expected stable or unstable, got '" + s + "'");
}

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  json sys;
  sys["id"] = cfg.system.id;
  json params = json::object();
  for (const auto& [k, v] : cfg.system.params) params[k] = hex(v);
  sys["params"] = params;
  if (cfg.system.id == "affine") {
    sys["A"] = hex_matrix(cfg.system.A);
    sys["G"] = hex_matrix(cfg.system.G);
    sys["c"] = hex_vector(std::vector<double>(cfg.system.c.data(), cfg.system.c.data() + cfg.system.c.size()));
  }

  json man;
  man["side"] = to_string(cfg.manifold.side);
  man["rho"] = hex(cfg.manifold.rho);
  man["beta"] = cfg.manifold.beta ? hex(*cfg.manifold.beta) : json(nullptr);
  man["eps"] = cfg.manifold.eps ? hex(*cfg.manifold.eps) : json(nullptr);
  man["N"] = cfg.manifold.N;
  man["samples"] = cfg.manifold.samples;
  man["needles"] = cfg.manifold.needles;
  man["bisection"] = cfg.manifold.bisection;
  man["invariance_t"] = hex(cfg.manifold.invariance_t);
  man["pullback"] = cfg.manifold.pullback;

  json ant;
  ant["experiment"] = cfg.anticipate.experiment;
  ant["levels"] = cfg.anticipate.levels;
  ant["T"] = hex(cfg.anticipate.T);
  ant["trials"] = cfg.anticipate.trials;

  json j;
  j["schema_version"] = cfg.schema_version;
  j["system"] = sys;
  j["seed_base"] = cfg.seed_base;
  j["seeds"] = cfg.seeds;
  j["dt"] = hex(cfg.dt);
  j["horizon"] = hex(cfg.horizon);
  j["T"] = hex(cfg.T);
  j["block"] = hex(cfg.block);
  j["tau"] = hex(cfg.tau);
  j["gap"] = hex(cfg.gap);
  j["quadrature"] = to_string(cfg.quadrature);
  j["stationary_horizon"] = hex(cfg.stationary_horizon);
  j["x0"] = hex_vector(cfg.x0);
  j["manifold"] = man;
  j["anticipate"] = ant;
  j["levels"] = cfg.levels;
  j["threads"] = cfg.threads;
  j["out"] = cfg.out;
  j["dump_flow"] = cfg.dump_flow;
  j["report"] = cfg.report;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  Fields f(j, "");
  f.integer("schema_version", cfg.schema_version);
  if (cfg.schema_version != kConfigSchemaVersion) {
    throw ConfigError("schema_version: unsupported version " + std::to_string(cfg.schema_version) + " (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  }
  if (f.has("system")) {
    Fields s(f.raw("system"), "system");
    s.string("id", cfg.system.id);
    if (s.has("params")) {
      const json& p = s.raw("params");
      if (!p.is_object()) throw ConfigError("system.params: expected an object");
      for (auto it = p.begin(); it != p.end(); ++it) {
        cfg.system.params[it.key()] = parse_double(it.value(), "system.params." + it.key());
      }
    }
    if (s.has("A")) cfg.system.A = read_matrix(s.raw("A"), "system.A");
    if (s.has("G")) cfg.system.G = read_matrix(s.raw("G"), "system.G");
    if (s.has("c")) {
      const auto c = read_reals(s.raw("c"), "system.c");
      cfg.system.c = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
    }
    s.finish();
  }
  f.integer("seed_base", cfg.seed_base);
  f.integer("seeds", cfg.seeds);
  f.real("dt", cfg.dt);
  f.real("horizon", cfg.horizon);
  f.real("T", cfg.T);
  f.real("block", cfg.block);
  f.real("tau", cfg.tau);
  f.real("gap", cfg.gap);
  if (f.has("quadrature")) {
    std::string q;
    f.string("quadrature", q);
    cfg.quadrature = parse_quadrature(q);
  }
  f.real("stationary_horizon", cfg.stationary_horizon);
  if (f.has("x0")) cfg.x0 = read_reals(f.raw("x0"), "x0");
  if (f.has("manifold")) {
    Fields m(f.raw("manifold"), "manifold");
    if (m.has("side")) {
      std::string side;
      m.string("side", side);
      cfg.manifold.side = parse_side(side);
    }
    m.real("rho", cfg.manifold.rho);
    m.optional_real("beta", cfg.manifold.beta);
    m.optional_real("eps", cfg.manifold.eps);
    m.integer("N", cfg.manifold.N);
    m.integer("samples", cfg.manifold.samples);
    m.integer("needles", cfg.manifold.needles);
    m.integer("bisection", cfg.manifold.bisection);
    m.real("invariance_t", cfg.manifold.invariance_t);
    m.integer("pullback", cfg.manifold.pullback);
    m.finish();
  }
  if (f.has("anticipate")) {
    Fields a(f.raw("anticipate"), "anticipate");
    a.string("experiment", cfg.anticipate.experiment);
    a.integer("levels", cfg.anticipate.levels);
    a.real("T", cfg.anticipate.T);
    a.integer("trials", cfg.anticipate.trials);
    a.finish();
  }
  f.integer("levels", cfg.levels);
  f.integer("threads", cfg.threads);
  f.string("out", cfg.out);
  f.boolean("dump_flow", cfg.dump_flow);
  if (f.has("report")) {
    const json& r = f.raw("report");
    if (!r.is_array()) throw ConfigError("report: expected an array of strings");
    cfg.report.clear();
    for (const auto& item : r) {
      if (!item.is_string()) throw ConfigError("report: expected an array of strings");
      cfg.report.push_back(item.get<std::string>());
    }
  }
  f.finish();
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void validate_config(const ExperimentConfig& cfg) {
  const auto& names = builtin_system_names();
  const bool builtin = std::find(names.begin(), names.end(), cfg.system.id) != names.end();
  if (cfg.system.id == "affine") {
    const auto d = cfg.system.A.rows();
    if (d < 1 || cfg.system.A.cols() != d || cfg.system.G.rows() != d || cfg.system.G.cols() < 1) {
      throw ConfigError("system: affine systems need a square A and a G with matching rows");
    }
    if (cfg.system.c.size() != 0 && cfg.system.c.size() != d) throw ConfigError("system.c: wrong length");
    if (!cfg.system.params.empty()) throw ConfigError("system.params: not used by affine systems");
  } else if (!builtin) {
    throw ConfigError("system.id: unknown system '" + cfg.system.id + "'");
  } else {
    make_builtin(cfg.system.id, cfg.system.params);  // rejects unknown parameters
  }
  if (cfg.seeds < 1) throw ConfigError("seeds: must be at least 1");
  if (!(cfg.dt > 0.0)) throw ConfigError("dt: must be positive");
  if (cfg.threads < 1) throw ConfigError("threads: must be at least 1");
  if (!(cfg.horizon >= 0.0)) throw ConfigError("horizon: must be non-negative");
  auto on_grid = [&](double t, const char* field) {
    try {
      grid_nodes(t, cfg.dt, field);
    } catch (const GridError&) {
      std::ostringstream msg;
      msg << field << ": " << t << " is not a multiple of dt = " << cfg.dt;
      throw ConfigError(msg.str());
    }
  };
  on_grid(cfg.T, "T");
  on_grid(cfg.block, "block");
  on_grid(1.0, "dt (unit time)");
  on_grid(cfg.stationary_horizon, "stationary_horizon");
  on_grid(cfg.anticipate.T, "anticipate.T");
  if (cfg.horizon > 0.0) on_grid(cfg.horizon, "horizon");
  if (!(cfg.tau > 0.0)) throw ConfigError("tau: must be positive");
  if (!(cfg.gap >= 0.0)) throw ConfigError("gap: must be non-negative");
  if (cfg.levels < 1 || cfg.anticipate.levels < 1) throw ConfigError("levels: must be at least 1");
  static const std::set<std::string> anticipate{"substitution", "residual", "ito", "stratonovich"};
  if (!anticipate.count(cfg.anticipate.experiment)) {
    throw ConfigError("anticipate.experiment: expected substitution, residual, ito or stratonovich");
  }
  if (cfg.manifold.N < 1 || !(cfg.manifold.rho > 0.0)) throw ConfigError("manifold: N and rho must be positive");
  static const std::set<std::string> reports{"variance", "residual"};
  for (const auto& r : cfg.report) {
    if (!reports.count(r)) throw ConfigError("report: unknown item '" + r + "'");
  }
}

json result_json(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("out");
  j.erase("threads");
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = result_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace rds
