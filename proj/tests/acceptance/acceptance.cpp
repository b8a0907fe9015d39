// Acceptance run: one PASS/FAIL line per criterion, with the measured
// quantities underneath. Exit status is nonzero when any check fails that
// was not named with --known-fail.
#include "rds/anticipating.hpp"
#include "rds/ergodic.hpp"
#include "rds/experiments.hpp"
#include "rds/flow.hpp"
#include "rds/manifolds.hpp"
#include "rds/rng.hpp"
#include "rds/systems.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rds;

namespace {

struct Check {
  std::string id;
  std::string detail;
  bool ok;
};

struct Criterion {
  int number;
  std::string title;
  std::vector<Check> checks;
};

fs::path g_root = "acceptance_artifacts";
int g_threads = 0;  // 0: hardware concurrency, capped at 8

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json run(ExperimentConfig cfg, const std::string& name, const std::string& tag) {
  cfg.out = (g_root / tag).string();
  if (cfg.threads == 1) cfg.threads = g_threads;
  std::ostringstream log;
  const int rc = run_experiment(cfg, name, log);
  if (rc != kExitOk) throw std::runtime_error(name + " (" + tag + ") exited " + std::to_string(rc) + ": " + log.str());
  return json::parse(slurp(fs::path(cfg.out) / (name + ".json")));
}

// Rows of a CSV as maps from header to value.
std::vector<std::map<std::string, double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> head;
  {
    std::stringstream s(line);
    for (std::string c; std::getline(s, c, ',');) head.push_back(c);
  }
  std::vector<std::map<std::string, double>> rows;
  while (std::getline(in, line)) {
    std::stringstream s(line);
    std::map<std::string, double> r;
    std::size_t i = 0;
    for (std::string c; std::getline(s, c, ','); ++i) r[head.at(i)] = std::stod(c);
    rows.push_back(r);
  }
  return rows;
}

// ------------------------------------------------------------------ 1

Criterion exact_structure() {
  Criterion c{1, "exact discrete structure (helix, shift, cocycle, chain rule, inverse) <= 1e-8", {}};
  for (const auto& id : builtin_system_names()) {
    const SdeSystem sys = make_builtin(id);
    const SdeSystem ito = ito_form(sys);
    const auto base = NoisePath::sample(1, sys.noise_dim(), 4.0, 0.01);
    const auto probes = SdeSystem::probe_points(sys.dim(), 100, 777);
    HelixField F;
    F.drift = ito.drift().value;
    for (const auto& g : ito.diffusions()) F.diffusions.push_back(g.value);
    NormalStream u(99, 3);
    double helix = 0, shift = 0, cocycle = 0, chain = 0, inverse = 0;
    for (const auto& x : probes) {
      // base point theta(r) with r in [-1, 1]; s, t in (0, 1]
      const auto path = base.shifted_nodes(std::lround((2.0 * u.uniform() - 1.0) * 100));
      const double s = path.time_of(std::lround(u.uniform() * 99) + 1);
      const double t = path.time_of(std::lround(u.uniform() * 99) + 1);
      helix = std::max(helix, verify_helix(F, path, -s, t, std::span<const Vector>(&x, 1)));
      helix = std::max(helix, verify_helix(F, path, s, t, std::span<const Vector>(&x, 1)));
      const auto a = path.shifted(-s).shifted(t), b = path.shifted(t - s);
      for (long k = -50; k <= 50; ++k) shift = std::max(shift, (a.value(k) - b.value(k)).norm());
      cocycle = std::max(cocycle, cocycle_residual(sys, path, x, s, t));
      chain = std::max(chain, tangent_chain_residual(sys, path, x, s, t));
      const Vector back = integrate_backward(sys, path, t, x).terminal();
      inverse = std::max(inverse, (integrate_forward(sys, path, -t, 0.0, back).terminal() - x).norm());
      const Vector fwd = integrate_forward(sys, path, 0.0, t, x).terminal();
      inverse = std::max(inverse, (integrate_backward(sys, path.shifted(t), t, fwd).terminal() - x).norm());
    }
    const double worst = std::max({helix, shift, cocycle, chain, inverse});
    c.checks.push_back({"1." + id,
                        id + ": helix=" + fmt(helix) + " shift=" + fmt(shift) + " cocycle=" + fmt(cocycle) +
                            " chain=" + fmt(chain) + " inverse=" + fmt(inverse),
                        worst <= 1e-8});
  }
  return c;
}

// ------------------------------------------------------------------ 2

Criterion stationarity() {
  Criterion c{2, "stationarity: OU residual order 0.9-1.2; hyperbolic2d anchor variance within 3 SE", {}};
  ExperimentConfig cv;
  cv.system.id = "ou";
  cv.seeds = 100;
  cv.T = 1.0;
  cv.levels = 3;
  cv.stationary_horizon = 20.0;
  const json j = run(cv, "convergence", "c2_convergence");
  const double order = j["ou_residual_order"].get<double>();
  c.checks.push_back({"2.ou-order", "OU residual order " + fmt(order) + " over dt " + j["dt"].dump(), within(order, 0.9, 1.2)});

  ExperimentConfig st;
  st.system.id = "hyperbolic2d";
  st.seeds = 1000;
  st.quadrature = Quadrature::LeftPoint;
  st.report = {"variance"};
  const json v = run(st, "stationary", "c2_stationary");
  for (int i = 0; i < 2; ++i) {
    const auto& comp = v["variance"][i];
    const double z = comp["z"].get<double>();
    c.checks.push_back({"2.variance" + std::to_string(i + 1),
                        "component " + std::to_string(i + 1) + ": var=" + fmt(comp["variance"].get<double>()) +
                            " oracle=" + fmt(comp["oracle_variance"].get<double>()) + " z=" + fmt(z),
                        std::abs(z) <= 3.0});
  }
  return c;
}

// ------------------------------------------------------------------ 3

Criterion spectrum() {
  Criterion c{3, "spectrum: hyperbolic2d {1,-1}+-0.05; GBM Ito -0.5+-0.1, Stratonovich 0+-0.1; Liouville +-0.05", {}};
  ExperimentConfig h;
  h.T = 50.0;
  const json a = run(h, "spectrum", "c3_hyperbolic2d");
  const double l1 = a["raw"][0].get<double>(), l2 = a["raw"][1].get<double>();
  c.checks.push_back({"3.hyperbolic2d", "hyperbolic2d T=50: " + fmt(l1) + ", " + fmt(l2),
                      std::abs(l1 - 1.0) <= 0.05 && std::abs(l2 + 1.0) <= 0.05});

  for (bool strat : {false, true}) {
    ExperimentConfig g;
    g.system.id = "gbm";
    if (strat) g.system.params["stratonovich"] = 1.0;
    g.T = 100.0;
    g.seeds = 16;
    const json r = run(g, "spectrum", strat ? "c3_gbm_strat" : "c3_gbm_ito");
    const double l = r["raw"][0].get<double>();
    const double target = strat ? 0.0 : -0.5;
    c.checks.push_back({strat ? "3.gbm-stratonovich" : "3.gbm-ito",
                        std::string(strat ? "GBM Stratonovich" : "GBM Ito") + " T=100, 16 seeds: " + fmt(l) +
                            " (se " + fmt(r["stderr"][0].get<double>()) + ")",
                        std::abs(l - target) <= 0.1});
  }

  for (const std::string id : {"ou", "hyperbolic2d"}) {
    ExperimentConfig l;
    l.system.id = id;
    l.T = 20.0;
    const json r = run(l, "spectrum", "c3_liouville_" + id);
    const double lhs = r["liouville"]["log_det_rate"].get<double>();
    const double rhs = r["liouville"]["trace_average"].get<double>();
    c.checks.push_back({"3.liouville-" + id, id + ": log det rate " + fmt(lhs) + " vs trace average " + fmt(rhs),
                        std::abs(lhs - rhs) <= 0.05});
  }
  return c;
}

// ------------------------------------------------------------------ 4

Criterion conversion() {
  Criterion c{4, "Ito/Stratonovich GBM agree within strong error; strong order 0.5+-0.2", {}};
  ExperimentConfig cv;
  cv.system.id = "ou";
  cv.seeds = 200;
  cv.T = 1.0;
  cv.levels = 4;
  cv.dt = 0.01;
  cv.stationary_horizon = 2.0;
  const json j = run(cv, "convergence", "c4_convergence");
  const double order = j["gbm_order"].get<double>();
  const double diff = j["ito_vs_stratonovich_max_difference"].get<double>();
  const double finest = j["gbm_rms_error"].back().get<double>();
  c.checks.push_back({"4.agreement", "max |Ito - Stratonovich| " + fmt(diff) + " vs finest strong error " + fmt(finest),
                      diff <= finest});
  c.checks.push_back({"4.order", "strong order " + fmt(order) + ", rms " + j["gbm_rms_error"].dump(),
                      within(order, 0.3, 0.7)});
  return c;
}

// ------------------------------------------------------------------ 5

struct Confusion {
  double precision, recall;
};

Confusion confusion(const std::vector<std::map<std::string, double>>& rows, int axis_zero) {
  int tp = 0, fp = 0, fn = 0;
  for (const auto& r : rows) {
    const bool truth = std::abs(r.at("x" + std::to_string(axis_zero + 1))) <= 1e-9;
    const bool member = r.at("member") == 1.0;
    tp += truth && member;
    fp += !truth && member;
    fn += truth && !member;
  }
  return {tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0, tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0};
}

Criterion manifolds() {
  Criterion c{5, "manifolds on hyperbolic2d and sheared2d", {}};
  for (const Side side : {Side::Stable, Side::Unstable}) {
    ExperimentConfig m;
    m.manifold.side = side;
    const std::string s = to_string(side);
    const json j = run(m, "manifold", "c5_hyperbolic2d_" + s);
    const auto rows = read_csv(g_root / ("c5_hyperbolic2d_" + s) / "manifold_points.csv");
    const auto pr = confusion(rows, side == Side::Stable ? 0 : 1);
    c.checks.push_back({"5." + s + "-classification",
                        s + ": precision " + fmt(pr.precision) + " recall " + fmt(pr.recall) + " over " +
                            std::to_string(rows.size()) + " samples",
                        pr.precision >= 0.95 && pr.recall >= 0.95});
    const double angle = j["angle_to_oseledec_deg"].get<double>();
    c.checks.push_back({"5." + s + "-tangent", s + ": tangent vs Oseledec " + fmt(angle) + " deg", angle <= 5.0});
    const double tr = j["transversality_deg"].get<double>();
    c.checks.push_back({"5." + s + "-transversality", s + ": transversality " + fmt(tr) + " deg", std::abs(tr - 90.0) <= 2.0});
    const double inv = j["invariance_fraction"].get<double>();
    c.checks.push_back({"5." + s + "-invariance", s + ": invariance fraction at t=2 " + fmt(inv), inv == 1.0});
    const double lo = j["member_slopes"]["min"].get<double>(), hi = j["member_slopes"]["max"].get<double>();
    c.checks.push_back({"5." + s + "-slopes",
                        s + ": member slopes in [" + fmt(lo) + ", " + fmt(hi) + "] over " +
                            j["member_slopes"]["count"].dump() + " members",
                        lo >= -1.1 && hi <= -0.9});
  }

  ExperimentConfig sh;
  sh.system.id = "sheared2d";
  const double cshear = 0.3;
  const json j = run(sh, "manifold", "c5_sheared2d");
  const auto rows = read_csv(g_root / "c5_sheared2d" / "manifold_points.csv");
  double fit = 0.0;
  int members = 0;
  for (const auto& r : rows) {
    if (r.at("member") != 1.0) continue;
    ++members;
    fit = std::max(fit, std::abs(r.at("x1") - cshear * r.at("x2") * r.at("x2")));
  }
  c.checks.push_back({"5.sheared-parabola",
                      "sheared2d: " + std::to_string(members) + " members, max |x1 - c x2^2| = " + fmt(fit),
                      members >= 10 && fit <= 1e-2});
  // Dpsi(y) e2 = (2 c y2, 1) at the preimage of the anchor
  const double y2 = j["anchor"][1].get<double>();
  Matrix expected(2, 1);
  expected << 2.0 * cshear * y2, 1.0;
  Matrix tangent(2, 1);
  tangent << j["tangent"][0][0].get<double>(), j["tangent"][1][0].get<double>();
  const double deg = subspace_distance(tangent, expected) * 180.0 / M_PI;
  c.checks.push_back({"5.sheared-tangent", "sheared2d: tangent vs Dpsi e2 " + fmt(deg) + " deg", deg <= 5.0});
  return c;
}

// ------------------------------------------------------------------ 6

Criterion degenerate() {
  Criterion c{6, "OU: stable estimate is the anchor only, unstable estimate is the whole ball", {}};
  ExperimentConfig m;
  m.system.id = "ou";
  const json s = run(m, "manifold", "c6_ou_stable");
  const auto rows = read_csv(g_root / "c6_ou_stable" / "manifold_points.csv");
  bool only_anchor = s["members"].get<int>() == 1;
  for (const auto& r : rows) {
    if (r.at("member") == 1.0 && r.at("x1") != 0.0) only_anchor = false;
  }
  c.checks.push_back({"6.stable", "stable members " + s["members"].dump() + ", expected dim " + s["expected_dim"].dump(),
                      only_anchor && s["expected_dim"].get<int>() == 0});
  m.manifold.side = Side::Unstable;
  const json u = run(m, "manifold", "c6_ou_unstable");
  c.checks.push_back({"6.unstable", "unstable members " + u["members"].dump() + ", rejected " + u["rejected"].dump(),
                      u["rejected"].get<int>() == 0});
  return c;
}

// ------------------------------------------------------------------ 7

Criterion rate_consistency_all() {
  Criterion c{7, "integer-time vs grid-time decay slopes agree within 0.05 for all members", {}};
  for (const std::string id : {"ou", "hyperbolic2d", "gbm", "sheared2d"}) {
    ExperimentConfig cfg;
    cfg.system.id = id;
    const SdeSystem sys = build_system(cfg.system);
    const auto path = NoisePath::sample(cfg.seed_base, sys.noise_dim(), cfg.stationary_horizon + cfg.T + 25.0, cfg.dt);
    const auto Z = CenteredCocycle::create(sys, path, build_stationary(cfg, sys, path));
    const auto spec = lyapunov_spectrum(Z, cfg.T);
    const Hyperbolicity h = hyperbolicity_check(spec, 0.0);
    double worst = 0.0;
    int checked = 0, short_window = 0;
    for (const Side side : {Side::Stable, Side::Unstable}) {
      if ((side == Side::Stable ? h.stable_dim : h.unstable_dim) == 0) continue;
      const auto p = default_params(Z, spec, side, 0.5);
      auto samples = ball_and_needle_samples(sys.dim(), 0.5, 100, 10, cfg.seed_base);
      if (h.stable_dim > 0 && h.unstable_dim > 0) {
        const auto split = oseledec_subspaces(Z, cfg.T);
        const Vector along = side == Side::Stable ? split.stable.col(0) : split.unstable.col(0);
        const Vector across = side == Side::Stable ? split.unstable.col(0) : split.stable.col(0);
        const auto extra = bisection_samples(Z, side, along, across, 0.5, 20, 10.0);
        samples.insert(samples.end(), extra.begin(), extra.end());
      }
      const auto est = side == Side::Stable ? classify_stable(Z, spec, p, samples) : classify_unstable(Z, spec, p, samples);
      for (const auto& x : est.members) {
        if (x.isZero(0.0)) continue;
        try {
          const auto r = rate_consistency(Z, x, p.N, side);
          worst = std::max(worst, std::abs(r.integer_slope - r.grid_slope));
          ++checked;
        } catch (const NumericalError&) {
          ++short_window;
        }
      }
    }
    c.checks.push_back({"7." + id,
                        id + ": max |integer - grid| = " + fmt(worst) + " over " + std::to_string(checked) +
                            " members (" + std::to_string(short_window) + " with a pre-floor window under 2)",
                        checked > 0 && worst <= 0.05});
  }
  return c;
}

// ------------------------------------------------------------------ 8

Criterion anticipating() {
  Criterion c{8, "anticipating calculus: substitution, Ito/Stratonovich partition sums, anticipating residual", {}};
  ExperimentConfig a;
  a.system.id = "gbm";
  a.anticipate.levels = 5;
  a.anticipate.trials = 100;

  a.anticipate.experiment = "substitution";
  const json s = run(a, "anticipate", "c8_substitution");
  c.checks.push_back({"8.substitution-exact",
                      "on-grid substitution exact zero in " + s["on_grid_exact_zero"].dump() + "/" +
                          s["on_grid_trials"].dump() + " trials; off-grid order " + fmt(s["order"].get<double>()),
                      s["on_grid_exact_zero"] == s["on_grid_trials"]});

  a.anticipate.experiment = "ito";
  const json i = run(a, "anticipate", "c8_ito");
  const double io = i["order"].get<double>();
  c.checks.push_back({"8.ito-order", "int W dW: RMS " + i["rms_error"].dump() + " order " + fmt(io), within(io, 0.3, 0.7)});

  a.anticipate.experiment = "stratonovich";
  const json st = run(a, "anticipate", "c8_stratonovich");
  double worst = 0.0;
  for (const auto& e : st["rms_error"]) worst = std::max(worst, e.get<double>());
  c.checks.push_back({"8.stratonovich-limit", "int W o dW: max RMS error vs W(T)^2/2 = " + fmt(worst), worst <= 1e-10});
  const double so = st["order"].is_number() ? st["order"].get<double>() : std::nan("");
  c.checks.push_back({"8.stratonovich-order",
                      "int W o dW: fitted order " + fmt(so) +
                          " (the partition sum telescopes to W(T)^2/2; the error is rounding at every level)",
                      within(so, 0.3, 0.7)});

  a.anticipate.experiment = "residual";
  a.dt = 0.005;
  a.anticipate.levels = 5;
  const json r = run(a, "anticipate", "c8_residual");
  const double ro = r["order"].get<double>();
  const double full = r["full_grid_residual_max"].get<double>();
  c.checks.push_back({"8.residual", "anticipating residual: full grid max " + fmt(full) + ", coarsening order " +
                                        fmt(ro) + ", RMS " + r["rms_error"].dump(),
                      full == 0.0 && within(ro, 0.3, 0.7)});
  return c;
}

// ------------------------------------------------------------------ 9

Criterion pullback() {
  Criterion c{9, "global stable pullback on hyperbolic2d stays on span e2 and grows monotonically", {}};
  const json j = run(ExperimentConfig{}, "global-stable", "c9_global_stable");
  const auto rows = read_csv(g_root / "c9_global_stable" / "global_stable.csv");
  double off = 0.0;
  for (const auto& r : rows) off = std::max(off, std::abs(r.at("x1")));
  c.checks.push_back({"9.span", "max |x1| over " + std::to_string(rows.size()) + " points = " + fmt(off), off <= 1e-6});
  c.checks.push_back({"9.monotone", "sizes " + j["sizes"].dump(), j["monotone"].get<bool>()});
  return c;
}

// ------------------------------------------------------------------ 10

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

Criterion determinism() {
  Criterion c{10, "identical config and seeds give byte-identical artifacts", {}};
  struct Case {
    std::string name;
    ExperimentConfig cfg;
  };
  std::vector<Case> cases;
  {
    ExperimentConfig s;
    s.x0 = {0.1, -0.2};
    s.seeds = 4;
    s.T = 2.0;
    s.dump_flow = true;
    cases.push_back({"simulate", s});
  }
  {
    ExperimentConfig s;
    s.seeds = 64;
    cases.push_back({"stationary", s});
  }
  {
    ExperimentConfig s;
    s.seeds = 4;
    cases.push_back({"spectrum", s});
  }
  {
    ExperimentConfig s;
    s.system.id = "sheared2d";
    s.manifold.samples = 50;
    cases.push_back({"manifold", s});
  }
  cases.push_back({"global-stable", ExperimentConfig{}});
  {
    ExperimentConfig s;
    s.anticipate.experiment = "ito";
    s.anticipate.trials = 20;
    cases.push_back({"anticipate", s});
  }
  {
    ExperimentConfig s;
    s.system.id = "ou";
    s.seeds = 8;
    s.T = 1.0;
    s.stationary_horizon = 5.0;
    cases.push_back({"convergence", s});
  }
  for (auto& k : cases) {
    k.cfg.threads = g_threads;
    run(k.cfg, k.name, "c10_" + k.name + "_a");
    run(k.cfg, k.name, "c10_" + k.name + "_b");
    const auto a = tree(g_root / ("c10_" + k.name + "_a"));
    const auto b = tree(g_root / ("c10_" + k.name + "_b"));
    c.checks.push_back({"10." + k.name, k.name + ": " + std::to_string(a.size()) + " files compared", !a.empty() && a == b});
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> known_fail;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--out" && i + 1 < argc) {
      g_root = argv[++i];
    } else if (arg == "--threads" && i + 1 < argc) {
      g_threads = std::max(0, std::atoi(argv[++i]));
    } else if (arg == "--known-fail" && i + 1 < argc) {
      known_fail.insert(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--out DIR] [--threads N] [--known-fail CHECK_ID]...\n";
      return 2;
    }
  }
  if (g_threads == 0) g_threads = static_cast<int>(std::max(1u, std::min(8u, std::thread::hardware_concurrency())));
  fs::remove_all(g_root);
  fs::create_directories(g_root);

  using Fn = Criterion (*)();
  const std::vector<std::pair<int, Fn>> criteria{
      {1, exact_structure}, {2, stationarity}, {3, spectrum},  {4, conversion},           {5, manifolds},
      {6, degenerate},      {7, rate_consistency_all}, {8, anticipating}, {9, pullback}, {10, determinism}};

  int unexpected = 0;
  for (const auto& [n, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Criterion c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c = Criterion{n, "criterion " + std::to_string(n), {{std::to_string(n) + ".error", e.what(), false}}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = std::all_of(c.checks.begin(), c.checks.end(), [](const Check& k) { return k.ok; });
    std::cout << (ok ? "PASS" : "FAIL") << " " << c.number << " " << c.title << " (" << fmt(secs) << " s)\n";
    for (const auto& k : c.checks) {
      const bool excused = !k.ok && known_fail.count(k.id);
      std::cout << "    " << (k.ok ? "ok  " : excused ? "KNOWN-FAIL " : "FAIL ") << k.id << ": " << k.detail << "\n";
      if (!k.ok && !excused) ++unexpected;
    }
    std::cout.flush();
  }
  return unexpected == 0 ? 0 : 1;
}
