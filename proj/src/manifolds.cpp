#include "rds/manifolds.hpp"

#include "rds/rng.hpp"
#include "rds/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rds {

const char* to_string(Side s) { return s == Side::Stable ? "stable" : "unstable"; }

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

long unit_nodes(const CenteredCocycle& Z) { return Z.path().node_of(1.0); }

int direction(Side s) { return s == Side::Stable ? 1 : -1; }

// Whether the relevant exponent is the +-infinity sentinel, i.e. the
// manifold on this side collapses to the anchor.
bool degenerate(const Hyperbolicity& h, Side s) {
  return s == Side::Stable ? h.lambda_i0 == -kInf : h.lambda_i0_minus_1 == kInf;
}

// |Z(+-n, x)| at integer times n = 0..N; stops early (returning fewer
// values) once `stop` says so. Throws on flow failure.
template <class Stop>
std::vector<double> integer_norms(const CenteredCocycle& Z, const Vector& x, int N, Side side, Stop stop) {
  const long u = unit_nodes(Z);
  const int dir = direction(side);
  const auto& step = Z.stepper();
  std::vector<double> out{x.norm()};
  if (stop(0, out[0])) return out;
  Vector s = x + Z.Y(0);
  Z.path().require_nodes(std::min(0L, dir * N * u), std::max(0L, dir * N * u), "membership test");
  for (int n = 1; n <= N; ++n) {
    if (dir > 0) {
      for (long k = (n - 1) * u; k < n * u; ++k) s += step.increment(k, s);
    } else {
      for (long k = -(n - 1) * u - 1; k >= -n * u; --k) s = step.invert_step(k, s);
    }
    if (!s.allFinite()) throw BlowupError("membership orbit blew up", dir * n * u);
    out.push_back((s - Z.Y(dir * n * u)).norm());
    if (stop(n, out.back())) break;
  }
  return out;
}

// Slope of log values over the leading run where values[n] >= 100 floor[n].
double prefloor_slope(const std::vector<double>& values, const std::vector<double>& floor, double step) {
  std::vector<double> t, y;
  for (std::size_t n = 0; n < values.size() && n < floor.size(); ++n) {
    if (!(values[n] > 0.0) || values[n] < 100.0 * floor[n]) break;
    t.push_back(static_cast<double>(n) * step);
    y.push_back(std::log(values[n]));
  }
  if (t.size() < 2) return kNaN;
  return stats::slope(t, y);
}

std::vector<double> anchor_floor(const CenteredCocycle& Z, int N, Side side) {
  return integer_norms(Z, Vector::Zero(Z.dim()), N, side, [](int, double) { return false; });
}

ManifoldEstimate classify(const CenteredCocycle& Z, const LyapunovSpectrum& spec, const ManifoldParams& p,
                          const std::vector<Vector>& samples, Side side) {
  if (p.side != side) throw InvalidArgument(std::string("parameters are for the ") + to_string(p.side) + " side");
  const Hyperbolicity h = hyperbolicity_check(spec, 0.0);
  check_params(h, p);
  ManifoldEstimate est;
  est.anchor = Z.Y(0);
  est.params = p;
  est.expected_dim = side == Side::Stable ? h.stable_dim : h.unstable_dim;
  const std::vector<double> floor = degenerate(h, side) ? std::vector<double>{} : anchor_floor(Z, p.N, side);
  for (const auto& x : samples) {
    if (x.size() != Z.dim()) throw InvalidArgument("sample has the wrong dimension");
    if (x.norm() > p.rho * (1.0 + 1e-12)) {
      throw InvalidArgument("sample lies outside the closed ball of radius rho around the anchor");
    }
    bool blew = false;
    if (is_member(Z, h, p, x, &blew)) {
      est.members.push_back(x);
      if (degenerate(h, side) || x.isZero(0.0)) {
        est.slopes.push_back(kNaN);
      } else {
        const auto values = integer_norms(Z, x, p.N, side, [](int, double) { return false; });
        est.slopes.push_back(prefloor_slope(values, floor, 1.0));
      }
    } else {
      est.rejected.push_back(x);
      est.blowup.push_back(blew);
    }
  }
  return est;
}

}  // namespace

double envelope_rate(const Hyperbolicity& h, const ManifoldParams& p) {
  return p.side == Side::Stable ? h.lambda_i0 + p.eps : -h.lambda_i0_minus_1 + p.eps;
}

void check_params(const Hyperbolicity& h, const ManifoldParams& p) {
  std::ostringstream msg;
  if (!(p.rho > 0.0) || !(p.beta > 0.0) || !(p.eps > 0.0)) {
    msg << "manifold parameters need rho, beta, eps > 0 (got " << p.rho << ", " << p.beta << ", " << p.eps << ")";
  } else if (!(p.beta > p.rho)) {
    msg << "manifold parameters need beta > rho (got beta = " << p.beta << ", rho = " << p.rho << ")";
  } else if (p.N < 1) {
    msg << "manifold parameters need N >= 1";
  } else if (!degenerate(h, p.side) && !(envelope_rate(h, p) < 0.0)) {
    msg << "envelope rate " << envelope_rate(h, p) << " is not negative; reduce eps";
  } else {
    return;
  }
  throw InvalidArgument(msg.str());
}

double residual_ceiling(const CenteredCocycle& Z, const Hyperbolicity& h, const ManifoldParams& p) {
  if (degenerate(h, p.side)) return 0.0;
  const double rate = envelope_rate(h, p);
  const auto floor = anchor_floor(Z, p.N, p.side);
  double c = 0.0;
  for (std::size_t n = 0; n < floor.size(); ++n) c = std::max(c, floor[n] * std::exp(-rate * static_cast<double>(n)));
  return c;
}

ManifoldParams default_params(const CenteredCocycle& Z, const LyapunovSpectrum& spec, Side side,
                              std::optional<double> rho, int N) {
  const Hyperbolicity h = hyperbolicity_check(spec, 0.0);
  ManifoldParams p;
  p.side = side;
  p.N = N;
  if (!degenerate(h, side)) {
    p.eps = side == Side::Stable ? -h.lambda_i0 / 2.0 : h.lambda_i0_minus_1 / 2.0;
  }
  const double ceiling = residual_ceiling(Z, h, p);
  if (rho) {
    p.rho = *rho;
    p.beta = std::max(10.0 * ceiling, 2.0 * p.rho);
  } else if (ceiling > 0.0) {
    p.beta = 10.0 * ceiling;
    p.rho = p.beta / 2.0;
  }
  return p;
}

std::vector<Vector> ball_and_needle_samples(int dim, double rho, int uniform, int per_needle, std::uint64_t seed) {
  std::vector<Vector> out{Vector::Zero(dim)};
  NormalStream rng(seed, 7);
  for (int k = 0; k < uniform; ++k) {
    Vector g(dim);
    for (int i = 0; i < dim; ++i) g[i] = rng.normal();
    const double r = rho * std::pow(rng.uniform(), 1.0 / dim);
    out.push_back(g.normalized() * r);
  }
  for (int i = 0; i < dim; ++i) {
    for (int k = 0; k < per_needle; ++k) {
      // evenly spaced on [-rho, rho], skipping the anchor
      const double s = -rho + 2.0 * rho * (static_cast<double>(k) + 0.5) / static_cast<double>(per_needle);
      out.push_back(Vector::Unit(dim, i) * s);
    }
  }
  return out;
}

std::vector<Vector> bisection_samples(const CenteredCocycle& Z, Side side, const Vector& along, const Vector& across,
                                      double rho, int count, double T) {
  const long nt = direction(side) * Z.path().node_of(T);
  const Vector zero = Vector::Zero(Z.dim());
  const Eigen::JacobiSVD<Matrix> svd(Z.tangent(nt, zero), Eigen::ComputeFullU);
  const Vector probe = svd.matrixU().col(0);
  const Vector a = along.normalized(), c = across.normalized();
  auto f = [&](const Vector& x) { return probe.dot(Z.evaluate(nt, x)); };
  std::vector<Vector> out;
  for (int j = 0; j < count; ++j) {
    const double s = -rho + 2.0 * rho * (static_cast<double>(j) + 0.5) / static_cast<double>(count);
    double lo = -rho, hi = rho;
    double flo, fhi;
    try {
      flo = f(s * a + lo * c);
      fhi = f(s * a + hi * c);
    } catch (const Error&) {
      continue;
    }
    if (!(flo * fhi < 0.0)) continue;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      double fm;
      try {
        fm = f(s * a + mid * c);
      } catch (const Error&) {
        break;
      }
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    const Vector x = s * a + 0.5 * (lo + hi) * c;
    if (x.norm() <= rho) out.push_back(x);
  }
  return out;
}

bool is_member(const CenteredCocycle& Z, const Hyperbolicity& h, const ManifoldParams& p, const Vector& x,
               bool* blowup) {
  if (blowup) *blowup = false;
  if (degenerate(h, p.side)) return x.isZero(0.0);
  const double rate = envelope_rate(h, p);
  bool ok = true;
  try {
    integer_norms(Z, x, p.N, p.side, [&](int n, double v) {
      if (!(v <= p.beta * std::exp(rate * static_cast<double>(n)))) ok = false;
      return !ok;
    });
  } catch (const BlowupError&) {
    if (blowup) *blowup = true;
    return false;
  } catch (const NewtonError&) {
    if (blowup) *blowup = true;
    return false;
  }
  return ok;
}

ManifoldEstimate classify_stable(const CenteredCocycle& Z, const LyapunovSpectrum& spec, const ManifoldParams& p,
                                 const std::vector<Vector>& samples) {
  return classify(Z, spec, p, samples, Side::Stable);
}

ManifoldEstimate classify_unstable(const CenteredCocycle& Z, const LyapunovSpectrum& spec, const ManifoldParams& p,
                                   const std::vector<Vector>& samples) {
  return classify(Z, spec, p, samples, Side::Unstable);
}

double decay_rate(const CenteredCocycle& Z, const Vector& x, double T) {
  const long n = Z.path().node_of(std::abs(T));
  if (n < 2) throw InvalidArgument("decay_rate needs at least two grid steps");
  const auto orbit = Z.orbit(T < 0 ? -n : n, x);
  std::vector<double> t, y;
  for (long k = n / 2; k <= n; ++k) {
    const double v = orbit[static_cast<std::size_t>(k)].norm();
    if (!std::isfinite(v)) throw BlowupError("decay_rate orbit is not finite", k);
    if (v == 0.0) return -kInf;
    t.push_back(static_cast<double>(k) * Z.path().dt());
    y.push_back(std::log(v));
  }
  return stats::slope(t, y);
}

RatePair rate_consistency(const CenteredCocycle& Z, const Vector& x, int N, Side side) {
  const long u = unit_nodes(Z);
  const int dir = direction(side);
  const auto orbit = Z.orbit(dir * N * u, x);
  const auto base = Z.orbit(dir * N * u, Vector::Zero(Z.dim()));
  long last = -1;
  for (std::size_t k = 0; k < orbit.size(); ++k) {
    const double v = orbit[k].norm();
    if (!(v > 0.0) || v < 100.0 * base[k].norm()) break;
    last = static_cast<long>(k);
  }
  const long whole = last / u;  // last integer time inside the window
  if (whole < 2) throw NumericalError("pre-floor window shorter than two integer times");
  std::vector<double> ti, yi, tg, yg;
  for (long k = 0; k <= whole * u; ++k) {
    const double t = static_cast<double>(k) * Z.path().dt();
    const double y = std::log(orbit[static_cast<std::size_t>(k)].norm());
    tg.push_back(t);
    yg.push_back(y);
    if (k % u == 0) {
      ti.push_back(t);
      yi.push_back(y);
    }
  }
  return {stats::slope(ti, yi), stats::slope(tg, yg), static_cast<double>(whole)};
}

double lipschitz_rate(const CenteredCocycle& Z, const ManifoldEstimate& est, double T) {
  if (est.members.size() < 2) throw InvalidArgument("lipschitz_rate needs at least two members");
  const int Tn = static_cast<int>(std::lround(T));
  if (Tn < 1) throw InvalidArgument("lipschitz_rate needs T >= 1");
  const long u = unit_nodes(Z);
  const int dir = direction(est.params.side);
  std::vector<std::vector<Vector>> at;  // at[member][n]
  for (const auto& x : est.members) {
    const auto orbit = Z.orbit(dir * Tn * u, x);
    std::vector<Vector> ints;
    for (int n = 0; n <= Tn; ++n) ints.push_back(orbit[static_cast<std::size_t>(n * u)]);
    at.push_back(std::move(ints));
  }
  std::vector<double> t, y;
  for (int n = 0; n <= Tn; ++n) {
    double worst = 0.0;
    for (std::size_t i = 0; i < at.size(); ++i) {
      for (std::size_t j = i + 1; j < at.size(); ++j) {
        const double d0 = (est.members[i] - est.members[j]).norm();
        if (d0 == 0.0) continue;
        worst = std::max(worst, (at[i][n] - at[j][n]).norm() / d0);
      }
    }
    if (worst == 0.0) return -kInf;
    t.push_back(n);
    y.push_back(std::log(worst));
  }
  return stats::slope(t, y);
}

Matrix tangent_estimate(ManifoldEstimate& est) {
  std::vector<Vector> near;
  for (const auto& x : est.members) {
    const double r = x.norm();
    if (r > 0.0 && r <= est.params.rho / 4.0) near.push_back(x);
  }
  const std::size_t need = static_cast<std::size_t>(std::max(est.expected_dim, 2));
  if (near.size() < need) {
    std::ostringstream msg;
    msg << "tangent_estimate: " << near.size() << " members within rho/4 of the anchor, need " << need
        << "; sample more points near the anchor";
    throw InvalidArgument(msg.str());
  }
  const Eigen::Index d = near.front().size();
  Matrix D(d, static_cast<Eigen::Index>(near.size()));
  for (std::size_t j = 0; j < near.size(); ++j) D.col(static_cast<Eigen::Index>(j)) = near[j];
  Eigen::JacobiSVD<Matrix> svd(D, Eigen::ComputeThinU);
  est.tangent = svd.matrixU().leftCols(est.expected_dim);
  return est.tangent;
}

double invariance_check(const CenteredCocycle& Z, const LyapunovSpectrum& spec, const ManifoldEstimate& est, double t) {
  if (est.members.empty()) throw InvalidArgument("invariance_check needs members");
  const long n = Z.path().node_of(t);
  if (n == 0) return 1.0;
  const int dir = direction(est.params.side);
  const Hyperbolicity h = hyperbolicity_check(spec, 0.0);
  const CenteredCocycle shifted = Z.shifted_nodes(dir * n);
  std::size_t kept = 0;
  for (const auto& x : est.members) {
    try {
      const Vector image = Z.evaluate(dir * n, x);
      // A degenerate estimate is the anchor alone; its image is the shifted
      // anchor up to the stationarity defect of Y.
      const bool ok = degenerate(h, est.params.side) ? image.norm() <= 1e-9 + 10.0 * Z.residual()
                                                     : is_member(shifted, h, est.params, image);
      if (ok) ++kept;
    } catch (const Error&) {
    }
  }
  return static_cast<double>(kept) / static_cast<double>(est.members.size());
}

double transversality_check(const ManifoldEstimate& stable, const ManifoldEstimate& unstable) {
  if (stable.tangent.cols() == 0 || unstable.tangent.cols() == 0) {
    if (stable.tangent.cols() + unstable.tangent.cols() != stable.anchor.size()) {
      throw InvalidArgument("transversality_check: tangent estimates missing");
    }
    return M_PI / 2;
  }
  if (stable.tangent.cols() + unstable.tangent.cols() != stable.tangent.rows()) {
    std::ostringstream msg;
    msg << "transversality_check: dim S + dim U = " << stable.tangent.cols() + unstable.tangent.cols()
        << " differs from the state dimension " << stable.tangent.rows();
    throw InvalidArgument(msg.str());
  }
  return minimum_angle(stable.tangent, unstable.tangent);
}

double hausdorff_distance(const std::vector<Vector>& A, const std::vector<Vector>& B) {
  if (A.empty() || B.empty()) throw InvalidArgument("hausdorff_distance needs nonempty sets");
  auto directed = [](const std::vector<Vector>& from, const std::vector<Vector>& to) {
    double worst = 0.0;
    for (const auto& a : from) {
      double best = kInf;
      for (const auto& b : to) best = std::min(best, (a - b).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(A, B), directed(B, A));
}

PullbackResult global_stable_pullback(const CenteredCocycle& Z, const LyapunovSpectrum& spec,
                                      const ManifoldEstimate& local, const std::vector<Vector>& samples, int n_max) {
  if (n_max < 0) throw InvalidArgument("n_max must be non-negative");
  const long u = unit_nodes(Z);
  Z.path().require_nodes(-n_max * u, (n_max + local.params.N) * u, "global_stable_pullback");
  PullbackResult out;
  out.sets.push_back(local.members);
  for (int n = 1; n <= n_max; ++n) {
    std::vector<Vector> next = out.sets.back();
    const CenteredCocycle shifted = Z.shifted_nodes(n * u);
    const ManifoldEstimate est = classify_stable(shifted, spec, local.params, samples);
    for (const auto& m : est.members) {
      try {
        next.push_back(Z.evaluate(-n * u, m, n * u));
      } catch (const Error&) {
        ++out.failures;
      }
    }
    out.sets.push_back(std::move(next));
  }
  return out;
}

}  // namespace rds
