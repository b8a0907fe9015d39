#include "rds/experiments.hpp"

#include "rds/anticipating.hpp"
#include "rds/ergodic.hpp"
#include "rds/flow.hpp"
#include "rds/manifolds.hpp"
#include "rds/rng.hpp"
#include "rds/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace rds {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<ExperimentInfo>& list_experiments() {
  static const std::vector<ExperimentInfo> registry{
      {"simulate", "Euler flow and tangent of a system on sampled paths; cocycle residual per seed"},
      {"stationary", "stationary trajectory anchors: variance against the Ito isometry, stationarity residuals"},
      {"spectrum", "Lyapunov spectrum by blockwise QR along the stationary trajectory, with the Liouville sum rule"},
      {"manifold", "local stable or unstable manifold by the decay-criterion membership test"},
      {"global-stable", "pullback enlargement of the local stable set through the inverse flow"},
      {"anticipate", "partition-sum Ito/Stratonovich integrals, substitution rule, anticipating residual"},
      {"convergence", "refinement studies: stationarity residual order and Ito/Stratonovich GBM strong order"},
  };
  return registry;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min(threads, n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&]() {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SdeSystem build_system(const SystemSpec& spec) {
  if (spec.id == "affine") {
    const Vector c = spec.c.size() ? spec.c : Vector::Zero(spec.A.rows());
    return make_affine(spec.A, spec.G, c, "affine");
  }
  return make_builtin(spec.id, spec.params);
}

namespace {

double param(const SystemSpec& s, const char* key, double fallback) {
  const auto it = s.params.find(key);
  return it == s.params.end() ? fallback : it->second;
}

Matrix g_matrix(const SystemSpec& s, double g11, double g12, double g21, double g22) {
  Matrix G(2, 2);
  G << param(s, "g11", g11), param(s, "g12", g12), param(s, "g21", g21), param(s, "g22", g22);
  return G;
}

}  // namespace

StationaryTrajectory build_stationary(const ExperimentConfig& cfg, const SdeSystem& sys, const NoisePath& path) {
  const auto& s = cfg.system;
  const double U = cfg.stationary_horizon;
  if (s.id == "ou") {
    return ou_stationary(path, param(s, "lambda", 1.0), U, cfg.quadrature, param(s, "sigma", 1.0));
  }
  if (s.id == "hyperbolic2d") {
    return hyperbolic2d_stationary(path, param(s, "l1", 1.0), param(s, "l2", -1.0), g_matrix(s, 1, 0, 0, 1), U,
                                   cfg.quadrature);
  }
  if (s.id == "gbm") return fixed_point_stationary(sys, path, Vector::Zero(1));
  if (s.id == "sheared2d") {
    const double l1 = param(s, "l1", 1.0), l2 = param(s, "l2", -1.0);
    const Matrix G = g_matrix(s, 1, 0, 0, 0);
    const SdeSystem linear = ito_to_stratonovich(make_hyperbolic2d(l1, l2, G));
    const StationaryTrajectory Y = hyperbolic2d_stationary(path, l1, l2, G, U, cfg.quadrature);
    return diffeo_transform(linear, Y, shear_diffeo(param(s, "c", 0.3))).second;
  }
  if (s.id == "affine") {
    const Matrix& A = s.A;
    const Matrix& G = s.G;
    const bool no_constant = s.c.size() == 0 || s.c.isZero(0.0);
    if (G.isZero(0.0) && no_constant) return fixed_point_stationary(sys, path, Vector::Zero(A.rows()));
    if (A.rows() == 1 && G.cols() == 1 && no_constant && A(0, 0) > 0.0) {
      return ou_stationary(path, A(0, 0), U, cfg.quadrature, G(0, 0));
    }
    if (A.rows() == 2 && no_constant && A(0, 1) == 0.0 && A(1, 0) == 0.0 && A(1, 1) < 0.0 && A(0, 0) > 0.0) {
      return hyperbolic2d_stationary(path, A(0, 0), A(1, 1), G, U, cfg.quadrature);
    }
  }
  throw InvalidArgument("no stationary trajectory construction for system '" + s.id + "'");
}

namespace {

std::uint64_t seed_of(const ExperimentConfig& cfg, int i) { return cfg.seed_base + static_cast<std::uint64_t>(i); }

json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
  return rows;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf")); }

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write '" + file.string() + "'");
  out << text;
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

double horizon_or(const ExperimentConfig& cfg, double needed) { return cfg.horizon > 0.0 ? cfg.horizon : needed; }

// Least-squares slope of log2(y) against log2(x), skipping non-positive entries.
double loglog_order(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log2(x[i]));
      ly.push_back(std::log2(y[i]));
    }
  }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return stats::slope(lx, ly);
}

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

// ---------------------------------------------------------------- simulate

void run_simulate(const ExperimentConfig& cfg, const SdeSystem& sys, const fs::path& dir, json& summary) {
  const double horizon = horizon_or(cfg, cfg.T);
  Vector x0 = Vector::Zero(sys.dim());
  if (!cfg.x0.empty()) {
    if (static_cast<int>(cfg.x0.size()) != sys.dim()) throw ConfigError("x0: wrong dimension for the system");
    x0 = Eigen::Map<const Vector>(cfg.x0.data(), sys.dim());
  }
  const int n = cfg.seeds;
  std::vector<json> rows(static_cast<std::size_t>(n));
  parallel_for(n, cfg.threads, [&](int i) {
    const auto seed = seed_of(cfg, i);
    const NoisePath path = NoisePath::sample(seed, sys.noise_dim(), horizon, cfg.dt);
    const FlowTrajectory flow = integrate_forward(sys, path, 0.0, cfg.T, x0);
    const TangentTrajectory tangent = tangent_flow(sys, path, 0.0, cfg.T, x0);
    const long nt = path.node_of(cfg.T);
    const double half = path.time_of(nt / 2), rest = path.time_of(nt - nt / 2);
    json r;
    r["seed"] = seed;
    r["terminal"] = vec(flow.terminal());
    r["tangent"] = mat(tangent.terminal());
    r["cocycle_residual"] = cocycle_residual(sys, path, x0, half, rest);
    rows[static_cast<std::size_t>(i)] = r;
    if (cfg.dump_flow) {
      std::ostringstream f, p;
      write_flow_csv(f, flow, &tangent);
      path.write_csv(p);
      write_text(dir / ("flow_" + std::to_string(seed) + ".csv"), f.str());
      write_text(dir / ("path_" + std::to_string(seed) + ".csv"), p.str());
    }
  });
  summary["runs"] = rows;
}

// -------------------------------------------------------------- stationary

std::vector<double> oracle_variances(const ExperimentConfig& cfg) {
  const auto& s = cfg.system;
  if (s.id == "ou") {
    const double l = param(s, "lambda", 1.0), sg = param(s, "sigma", 1.0);
    return {sg * sg / (2.0 * l)};
  }
  if (s.id == "hyperbolic2d") {
    const Matrix G = g_matrix(s, 1, 0, 0, 1);
    return {G.row(0).squaredNorm() / (2.0 * std::abs(param(s, "l1", 1.0))),
            G.row(1).squaredNorm() / (2.0 * std::abs(param(s, "l2", -1.0)))};
  }
  return {};
}

void run_stationary(const ExperimentConfig& cfg, const SdeSystem& sys, const fs::path& dir, json& summary) {
  const bool want_residual = std::find(cfg.report.begin(), cfg.report.end(), "residual") != cfg.report.end();
  const bool want_variance = std::find(cfg.report.begin(), cfg.report.end(), "variance") != cfg.report.end();
  const double horizon = horizon_or(cfg, cfg.stationary_horizon + (want_residual ? cfg.T : 0.0));
  const int n = cfg.seeds, d = sys.dim();
  std::vector<Vector> anchors(static_cast<std::size_t>(n));
  std::vector<double> residuals(static_cast<std::size_t>(n), 0.0);
  parallel_for(n, cfg.threads, [&](int i) {
    const NoisePath path = NoisePath::sample(seed_of(cfg, i), sys.noise_dim(), horizon, cfg.dt);
    const StationaryTrajectory Y = build_stationary(cfg, sys, path);
    anchors[static_cast<std::size_t>(i)] = Y.anchor();
    if (want_residual) residuals[static_cast<std::size_t>(i)] = stationarity_residual(sys, path, Y, cfg.T);
  });

  std::ostringstream csv;
  csv << "seed";
  for (int j = 0; j < d; ++j) csv << ",y" << (j + 1);
  if (want_residual) csv << ",residual";
  csv << "\n";
  for (int i = 0; i < n; ++i) {
    csv << seed_of(cfg, i);
    for (int j = 0; j < d; ++j) csv << ',' << csv_number(anchors[static_cast<std::size_t>(i)][j]);
    if (want_residual) csv << ',' << csv_number(residuals[static_cast<std::size_t>(i)]);
    csv << "\n";
  }
  write_text(dir / "stationary.csv", csv.str());

  if (want_variance) {
    const auto oracle = oracle_variances(cfg);
    json comps = json::array();
    for (int j = 0; j < d; ++j) {
      std::vector<double> y;
      for (const auto& a : anchors) y.push_back(a[j]);
      const double m = stats::mean(y), v = stats::variance(y);
      double m4 = 0.0;
      for (double x : y) m4 += std::pow(x - m, 4);
      m4 /= static_cast<double>(n);
      const double se = std::sqrt(std::max(0.0, m4 - v * v) / static_cast<double>(n));
      json c;
      c["mean"] = m;
      c["variance"] = v;
      c["variance_se"] = se;
      if (static_cast<std::size_t>(j) < oracle.size()) {
        c["oracle_variance"] = oracle[static_cast<std::size_t>(j)];
        c["z"] = se > 0.0 ? (v - oracle[static_cast<std::size_t>(j)]) / se : 0.0;
      }
      comps.push_back(c);
    }
    summary["variance"] = comps;
  }
  if (want_residual) {
    std::vector<double> sorted = residuals;
    std::sort(sorted.begin(), sorted.end());
    json r;
    r["T"] = cfg.T;
    r["mean"] = stats::mean(residuals);
    r["median"] = sorted[sorted.size() / 2];
    r["max"] = sorted.back();
    r["fraction_below_0.05"] =
        static_cast<double>(std::count_if(sorted.begin(), sorted.end(), [](double x) { return x < 0.05; })) / n;
    summary["residual"] = r;
  }
}

// ---------------------------------------------------------------- spectrum

void run_spectrum(const ExperimentConfig& cfg, const SdeSystem& sys, const fs::path& dir, json& summary) {
  const double horizon = horizon_or(cfg, cfg.stationary_horizon + cfg.T + 1.0);
  const int n = cfg.seeds, d = sys.dim();
  std::vector<std::vector<double>> raw(static_cast<std::size_t>(n));
  std::vector<double> logdet(static_cast<std::size_t>(n)), trace(static_cast<std::size_t>(n));
  parallel_for(n, cfg.threads, [&](int i) {
    const NoisePath path = NoisePath::sample(seed_of(cfg, i), sys.noise_dim(), horizon, cfg.dt);
    const CenteredCocycle Z = CenteredCocycle::create(sys, path, build_stationary(cfg, sys, path));
    const LyapunovSpectrum s = lyapunov_spectrum(Z, cfg.T, cfg.block, cfg.tau);
    raw[static_cast<std::size_t>(i)] = s.raw;
    logdet[static_cast<std::size_t>(i)] = log_det_rate(Z, cfg.T, cfg.block);
    trace[static_cast<std::size_t>(i)] = trace_average(Z, cfg.T, std::max(1L, path.node_of(cfg.block) / 10));
  });
  std::vector<double> mean(static_cast<std::size_t>(d)), se(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    std::vector<double> col;
    for (const auto& r : raw) col.push_back(r[static_cast<std::size_t>(j)]);
    mean[static_cast<std::size_t>(j)] = stats::mean(col);
    se[static_cast<std::size_t>(j)] = n > 1 ? stats::standard_error(col) : 0.0;
  }
  const LyapunovSpectrum clustered = cluster_exponents(mean, cfg.tau);
  const Hyperbolicity h = hyperbolicity_check(clustered, cfg.gap);

  std::ostringstream csv;
  csv << "seed";
  for (int j = 0; j < d; ++j) csv << ",lambda" << (j + 1);
  csv << ",log_det_rate,trace_average\n";
  for (int i = 0; i < n; ++i) {
    csv << seed_of(cfg, i);
    for (double v : raw[static_cast<std::size_t>(i)]) csv << ',' << csv_number(v);
    csv << ',' << csv_number(logdet[static_cast<std::size_t>(i)]) << ',' << csv_number(trace[static_cast<std::size_t>(i)])
        << "\n";
  }
  write_text(dir / "spectrum.csv", csv.str());

  summary["raw"] = mean;
  summary["stderr"] = se;
  summary["exponents"] = clustered.exponents;
  summary["multiplicities"] = clustered.multiplicities;
  summary["hyperbolic"] = h.hyperbolic;
  summary["lambda_i0"] = num(h.lambda_i0);
  summary["lambda_i0_minus_1"] = num(h.lambda_i0_minus_1);
  summary["liouville"] = {{"log_det_rate", stats::mean(logdet)}, {"trace_average", stats::mean(trace)}};
}

// ---------------------------------------------------------------- manifold

struct ManifoldSetup {
  NoisePath path;
  CenteredCocycle Z;
  LyapunovSpectrum spec;
};

double manifold_horizon(const ExperimentConfig& cfg) {
  const auto& m = cfg.manifold;
  return horizon_or(cfg, cfg.stationary_horizon +
                             std::max(cfg.T, m.N + m.invariance_t + static_cast<double>(m.pullback)) + 1.0);
}

ManifoldSetup manifold_setup(const ExperimentConfig& cfg, const SdeSystem& sys) {
  const NoisePath path = NoisePath::sample(cfg.seed_base, sys.noise_dim(), manifold_horizon(cfg), cfg.dt);
  CenteredCocycle Z = CenteredCocycle::create(sys, path, build_stationary(cfg, sys, path));
  LyapunovSpectrum spec = lyapunov_spectrum(Z, cfg.T, cfg.block, cfg.tau);
  return {path, std::move(Z), std::move(spec)};
}

ManifoldParams manifold_params(const ExperimentConfig& cfg, const CenteredCocycle& Z, const LyapunovSpectrum& spec,
                               Side side) {
  ManifoldParams p = default_params(Z, spec, side, cfg.manifold.rho, cfg.manifold.N);
  if (cfg.manifold.beta) p.beta = *cfg.manifold.beta;
  if (cfg.manifold.eps) p.eps = *cfg.manifold.eps;
  return p;
}

std::vector<Vector> manifold_samples(const ExperimentConfig& cfg, const CenteredCocycle& Z,
                                     const LyapunovSpectrum& spec, Side side) {
  const auto& m = cfg.manifold;
  auto samples = ball_and_needle_samples(Z.dim(), m.rho, m.samples, m.needles, cfg.seed_base);
  const Hyperbolicity h = hyperbolicity_check(spec, 0.0);
  if (m.bisection > 0 && h.stable_dim > 0 && h.unstable_dim > 0) {
    const OseledecSplitting split = oseledec_subspaces(Z, cfg.T, cfg.gap);
    const Vector along = side == Side::Stable ? split.stable.col(0) : split.unstable.col(0);
    const Vector across = side == Side::Stable ? split.unstable.col(0) : split.stable.col(0);
    const auto extra = bisection_samples(Z, side, along, across, m.rho, m.bisection, m.N / 2.0);
    samples.insert(samples.end(), extra.begin(), extra.end());
  }
  return samples;
}

void run_manifold(const ExperimentConfig& cfg, const SdeSystem& sys, const fs::path& dir, json& summary) {
  const ManifoldSetup s = manifold_setup(cfg, sys);
  const Side side = cfg.manifold.side;
  const Side other = side == Side::Stable ? Side::Unstable : Side::Stable;
  const ManifoldParams p = manifold_params(cfg, s.Z, s.spec, side);
  const auto samples = manifold_samples(cfg, s.Z, s.spec, side);
  ManifoldEstimate est =
      side == Side::Stable ? classify_stable(s.Z, s.spec, p, samples) : classify_unstable(s.Z, s.spec, p, samples);

  std::ostringstream csv;
  const int d = sys.dim();
  for (int j = 0; j < d; ++j) csv << "x" << (j + 1) << ",";
  csv << "member,slope,blowup\n";
  for (std::size_t k = 0; k < est.members.size(); ++k) {
    for (int j = 0; j < d; ++j) csv << csv_number(est.members[k][j]) << ",";
    csv << "1," << csv_number(est.slopes[k]) << ",0\n";
  }
  for (std::size_t k = 0; k < est.rejected.size(); ++k) {
    for (int j = 0; j < d; ++j) csv << csv_number(est.rejected[k][j]) << ",";
    csv << "0,nan," << (est.blowup[k] ? 1 : 0) << "\n";
  }
  write_text(dir / "manifold_points.csv", csv.str());

  summary["side"] = to_string(side);
  summary["params"] = {{"rho", p.rho}, {"beta", p.beta}, {"eps", p.eps}, {"N", p.N}};
  summary["spectrum"] = s.spec.raw;
  summary["anchor"] = vec(est.anchor);
  summary["members"] = est.members.size();
  summary["rejected"] = est.rejected.size();
  summary["expected_dim"] = est.expected_dim;
  std::vector<double> slopes;
  for (double v : est.slopes) {
    if (std::isfinite(v)) slopes.push_back(v);
  }
  if (!slopes.empty()) {
    const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
    summary["member_slopes"] = {{"count", slopes.size()}, {"mean", stats::mean(slopes)}, {"min", *lo}, {"max", *hi}};
  }
  summary["invariance_fraction"] = est.members.empty() ? 0.0 : invariance_check(s.Z, s.spec, est, cfg.manifold.invariance_t);
  try {
    tangent_estimate(est);
    summary["tangent"] = mat(est.tangent);
    const Hyperbolicity h = hyperbolicity_check(s.spec, 0.0);
    if (h.stable_dim > 0 && h.unstable_dim > 0) {
      const OseledecSplitting split = oseledec_subspaces(s.Z, cfg.T, cfg.gap);
      const Matrix& target = side == Side::Stable ? split.stable : split.unstable;
      summary["angle_to_oseledec_deg"] = subspace_distance(est.tangent, target) * 180.0 / M_PI;
      const ManifoldParams q = manifold_params(cfg, s.Z, s.spec, other);
      const auto other_samples = manifold_samples(cfg, s.Z, s.spec, other);
      ManifoldEstimate opposite = other == Side::Stable ? classify_stable(s.Z, s.spec, q, other_samples)
                                                        : classify_unstable(s.Z, s.spec, q, other_samples);
      tangent_estimate(opposite);
      summary["transversality_deg"] = transversality_check(est, opposite) * 180.0 / M_PI;
    }
  } catch (const InvalidArgument& e) {
    summary["tangent"] = nullptr;
    summary["tangent_error"] = e.what();
  }
}

// ------------------------------------------------------------ global-stable

void run_global_stable(const ExperimentConfig& cfg, const SdeSystem& sys, const fs::path& dir, json& summary) {
  const ManifoldSetup s = manifold_setup(cfg, sys);
  const ManifoldParams p = manifold_params(cfg, s.Z, s.spec, Side::Stable);
  const auto samples = manifold_samples(cfg, s.Z, s.spec, Side::Stable);
  const ManifoldEstimate local = classify_stable(s.Z, s.spec, p, samples);
  const PullbackResult pb = global_stable_pullback(s.Z, s.spec, local, samples, cfg.manifold.pullback);
  json sizes = json::array();
  bool monotone = true;
  for (std::size_t n = 0; n < pb.sets.size(); ++n) {
    sizes.push_back(pb.sets[n].size());
    if (n > 0 && pb.sets[n].size() < pb.sets[n - 1].size()) monotone = false;
  }
  const Hyperbolicity h = hyperbolicity_check(s.spec, 0.0);
  if (h.stable_dim > 0 && h.unstable_dim > 0) {
    const Matrix S = oseledec_subspaces(s.Z, cfg.T, cfg.gap).stable;
    double worst = 0.0;
    for (const auto& x : pb.sets.back()) worst = std::max(worst, (x - S * (S.transpose() * x)).norm());
    summary["max_distance_to_stable_subspace"] = worst;
  }
  std::ostringstream csv;
  csv << "level";
  for (int j = 0; j < sys.dim(); ++j) csv << ",x" << (j + 1);
  csv << "\n";
  for (std::size_t n = 0; n < pb.sets.size(); ++n) {
    const std::size_t from = n == 0 ? 0 : pb.sets[n - 1].size();
    for (std::size_t k = from; k < pb.sets[n].size(); ++k) {
      csv << n;
      for (int j = 0; j < sys.dim(); ++j) csv << ',' << csv_number(pb.sets[n][k][j]);
      csv << "\n";
    }
  }
  write_text(dir / "global_stable.csv", csv.str());
  summary["sizes"] = sizes;
  summary["monotone"] = monotone;
  summary["inverse_failures"] = pb.failures;
}

// --------------------------------------------------------------- anticipate

VectorField times_x() {
  return {[](const Vector& x) -> Vector { return x; },
          [](const Vector& x) -> Matrix { return Matrix::Identity(x.size(), x.size()); },
          [](const Vector& x, const Vector&) -> Matrix { return Matrix::Zero(x.size(), x.size()); }};
}

VectorField sine_field() {
  return {[](const Vector& x) -> Vector { return x.array().sin().matrix(); },
          [](const Vector& x) -> Matrix { return x.array().cos().matrix().asDiagonal(); },
          [](const Vector& x, const Vector& v) -> Matrix {
            return (-x.array().sin() * v.array()).matrix().asDiagonal();
          }};
}

struct OrderTable {
  std::vector<double> mesh;
  std::vector<double> error;
};

void write_order(const fs::path& file, const OrderTable& t, const char* label) {
  std::ostringstream csv;
  csv << "mesh," << label << "\n";
  for (std::size_t i = 0; i < t.mesh.size(); ++i) csv << csv_number(t.mesh[i]) << ',' << csv_number(t.error[i]) << "\n";
  write_text(file, csv.str());
}

void run_anticipate(const ExperimentConfig& cfg, const SdeSystem& sys, const fs::path& dir, json& summary) {
  const auto& a = cfg.anticipate;
  const int L = a.levels, n = a.trials;
  const std::string& kind = a.experiment;
  summary["kind"] = kind;
  OrderTable table;

  if (kind == "ito" || kind == "stratonovich") {
    // int_0^T W dW against its closed form, along dyadic partitions of a fine grid.
    const long total = 1L << (L + 6);
    const double dt = a.T / static_cast<double>(total);
    const PartitionScheme scheme = PartitionScheme::dyadic(total, L);
    std::vector<std::vector<double>> err(static_cast<std::size_t>(L), std::vector<double>(static_cast<std::size_t>(n)));
    parallel_for(n, cfg.threads, [&](int i) {
      const NoisePath path = NoisePath::sample(seed_of(cfg, i), 1, a.T, dt);
      const SpatialField M{path, {times_x()}, {}};
      const Process f = [&path](long node) { return Vector::Constant(1, path.value(0, node)); };
      const double w = path.value(0, total);
      const double exact = kind == "ito" ? (w * w - a.T) / 2.0 : w * w / 2.0;
      for (int l = 0; l < L; ++l) {
        const auto& part = scheme.levels[static_cast<std::size_t>(l)];
        const Vector v = kind == "ito" ? ito_partition_sum(M, f, part, total) : stratonovich_partition_sum(M, f, part, total);
        err[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = v[0] - exact;
      }
    });
    for (int l = 0; l < L; ++l) {
      table.mesh.push_back(scheme.mesh(static_cast<std::size_t>(l), dt));
      table.error.push_back(rms(err[static_cast<std::size_t>(l)]));
    }
  } else if (kind == "substitution") {
    // M(t, x) = sin(x) W(t), f(t, x) = x, Y = W(T): interpolation error in x.
    const long total = 1L << (L + 6);
    const double dt = a.T / static_cast<double>(total);
    std::vector<long> full(static_cast<std::size_t>(total + 1));
    for (long k = 0; k <= total; ++k) full[static_cast<std::size_t>(k)] = k;
    std::vector<std::vector<double>> err(static_cast<std::size_t>(L), std::vector<double>(static_cast<std::size_t>(n)));
    std::vector<int> exact_zero(static_cast<std::size_t>(n), 0);
    const ProcessField f = [](long, const Vector& x) { return x; };
    parallel_for(n, cfg.threads, [&](int i) {
      const NoisePath path = NoisePath::sample(seed_of(cfg, i), 1, a.T, dt);
      const SpatialField M{path, {sine_field()}, {}};
      const Vector Y = Vector::Constant(1, std::clamp(path.value(0, total), -5.9, 5.9));
      for (int l = 0; l < L; ++l) {
        const double h = 12.0 / static_cast<double>(1 << (l + 3));
        const UniformGrid grid{Vector::Constant(1, -6.0), Vector::Constant(1, h), {(1 << (l + 3)) + 1}};
        err[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] =
            substitution_check(M, f, Y, full, total, grid).difference;
      }
      // On-grid substitution: Y placed on a node of the finest grid.
      const int cells = 1 << (L + 2);
      const UniformGrid grid{Vector::Constant(1, -6.0), Vector::Constant(1, 12.0 / cells), {cells + 1}};
      NormalStream pick(seed_of(cfg, i), 11);
      const int node = static_cast<int>(pick.uniform() * cells);
      exact_zero[static_cast<std::size_t>(i)] = substitution_check(M, f, grid.node({node}), full, total, grid).difference == 0.0;
    });
    for (int l = 0; l < L; ++l) {
      table.mesh.push_back(12.0 / static_cast<double>(1 << (l + 3)));
      table.error.push_back(rms(err[static_cast<std::size_t>(l)]));
    }
    int zeros = 0;
    for (int z : exact_zero) zeros += z;
    summary["on_grid_exact_zero"] = zeros;
    summary["on_grid_trials"] = n;
  } else {
    // residual: Y = 1 + tanh(W_1(T)) / 2 in every coordinate, partitions every 2^l nodes.
    const long total = grid_nodes(a.T, cfg.dt, "anticipate.T");
    std::vector<std::vector<double>> err(static_cast<std::size_t>(L), std::vector<double>(static_cast<std::size_t>(n)));
    parallel_for(n, cfg.threads, [&](int i) {
      const NoisePath path = NoisePath::sample(seed_of(cfg, i), sys.noise_dim(), a.T, cfg.dt);
      const Vector Y = Vector::Constant(sys.dim(), 1.0 + 0.5 * std::tanh(path.value(0, total)));
      for (int l = 0; l < L; ++l) {
        const long stride = 1L << l;
        std::vector<long> part;
        for (long k = 0; k < total; k += stride) part.push_back(k);
        part.push_back(total);
        err[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = anticipating_sde_residual(sys, path, Y, part, total);
      }
    });
    for (int l = 0; l < L; ++l) {
      table.mesh.push_back(static_cast<double>(1L << l) * cfg.dt);
      table.error.push_back(rms(err[static_cast<std::size_t>(l)]));
    }
    summary["full_grid_residual_max"] = *std::max_element(err[0].begin(), err[0].end());
  }
  write_order(dir / ("anticipate_" + kind + ".csv"), table, "rms_error");
  summary["mesh"] = table.mesh;
  summary["rms_error"] = table.error;
  // The full-grid residual is exactly zero and carries no rate information.
  OrderTable fit = table;
  if (kind == "residual" && fit.mesh.size() > 1) {
    fit.mesh.erase(fit.mesh.begin());
    fit.error.erase(fit.error.begin());
  }
  summary["order"] = num(loglog_order(fit.mesh, fit.error));
}

// -------------------------------------------------------------- convergence

void run_convergence(const ExperimentConfig& cfg, const fs::path& dir, json& summary) {
  const int L = cfg.levels, n = cfg.seeds;
  const double lambda = cfg.system.id == "ou" ? param(cfg.system, "lambda", 1.0) : 1.0;
  const SdeSystem ou = make_ou(lambda, 1.0);
  const SdeSystem gbm_strat = make_gbm(1.0, 0.0, Convention::Stratonovich);
  const SdeSystem gbm_ito = make_gbm(1.0, 0.5, Convention::Ito);
  const double U = cfg.stationary_horizon;
  std::vector<std::vector<double>> ou_res(static_cast<std::size_t>(L + 1), std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<std::vector<double>> gbm_err = ou_res;
  std::vector<double> agreement(static_cast<std::size_t>(n), 0.0);
  parallel_for(n, cfg.threads, [&](int i) {
    NoisePath path = NoisePath::sample(seed_of(cfg, i), 1, horizon_or(cfg, U + cfg.T), cfg.dt);
    const Vector x0 = Vector::Ones(1);
    for (int l = 0; l <= L; ++l) {
      if (l > 0) path = path.refined(2);
      const StationaryTrajectory Y = ou_stationary(path, lambda, U, Quadrature::LeftPoint);
      ou_res[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = stationarity_residual(ou, path, Y, cfg.T);
      const Vector xs = integrate_forward(gbm_strat, path, 0.0, cfg.T, x0).terminal();
      const Vector xi = integrate_forward(gbm_ito, path, 0.0, cfg.T, x0).terminal();
      gbm_err[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = xs[0] - std::exp(path.value(0, path.node_of(cfg.T)));
      agreement[static_cast<std::size_t>(i)] = std::max(agreement[static_cast<std::size_t>(i)], std::abs(xs[0] - xi[0]));
    }
  });
  std::vector<double> dts, ou_mean, gbm_rms;
  std::ostringstream csv;
  csv << "level,dt,ou_residual_mean,gbm_rms_error\n";
  for (int l = 0; l <= L; ++l) {
    dts.push_back(cfg.dt / static_cast<double>(1 << l));
    ou_mean.push_back(stats::mean(ou_res[static_cast<std::size_t>(l)]));
    gbm_rms.push_back(rms(gbm_err[static_cast<std::size_t>(l)]));
    csv << l << ',' << csv_number(dts.back()) << ',' << csv_number(ou_mean.back()) << ',' << csv_number(gbm_rms.back())
        << "\n";
  }
  write_text(dir / "convergence.csv", csv.str());
  summary["dt"] = dts;
  summary["ou_residual_mean"] = ou_mean;
  summary["ou_residual_order"] = num(loglog_order(dts, ou_mean));
  summary["gbm_rms_error"] = gbm_rms;
  summary["gbm_order"] = num(loglog_order(dts, gbm_rms));
  summary["ito_vs_stratonovich_max_difference"] = *std::max_element(agreement.begin(), agreement.end());
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, const std::string& name, std::ostream& log) {
  const auto& reg = list_experiments();
  if (std::none_of(reg.begin(), reg.end(), [&](const ExperimentInfo& e) { return e.id == name; })) {
    log << "error: unknown experiment '" << name << "'\n";
    return kExitConfig;
  }
  std::optional<SdeSystem> sys;
  try {
    validate_config(cfg);
    sys = build_system(cfg.system);
  } catch (const Error& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const fs::path dir(cfg.out);
  try {
    fs::create_directories(dir);
    json summary;
    summary["experiment"] = name;
    summary["config_hash"] = config_hash(cfg);
    summary["config"] = result_json(cfg);
    summary["system"] = sys->name();
    if (name == "simulate") run_simulate(cfg, *sys, dir, summary);
    if (name == "stationary") run_stationary(cfg, *sys, dir, summary);
    if (name == "spectrum") run_spectrum(cfg, *sys, dir, summary);
    if (name == "manifold") run_manifold(cfg, *sys, dir, summary);
    if (name == "global-stable") run_global_stable(cfg, *sys, dir, summary);
    if (name == "anticipate") run_anticipate(cfg, *sys, dir, summary);
    if (name == "convergence") run_convergence(cfg, dir, summary);
    write_json(dir / (name + ".json"), summary);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace rds
