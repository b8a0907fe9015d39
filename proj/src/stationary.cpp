#include "rds/stationary.hpp"

#include "rds/flow.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace rds {

const char* to_string(StationaryKind k) {
  switch (k) {
    case StationaryKind::FixedPoint: return "fixed_point";
    case StationaryKind::OuIntegral: return "ou_integral";
    case StationaryKind::Hyperbolic2d: return "hyperbolic2d";
    case StationaryKind::DiffeoImage: return "diffeo_image";
  }
  return "?";
}

const char* to_string(Quadrature q) { return q == Quadrature::LeftPoint ? "left_point" : "euler_consistent"; }

StationaryTrajectory::StationaryTrajectory(StationaryKind kind, NoisePath path, double horizon, Rule rule)
    : kind_(kind), path_(std::move(path)), horizon_(horizon), rule_(std::move(rule)) {
  anchor_ = rule_(path_);
}

StationaryTrajectory StationaryTrajectory::shifted_nodes(long k) const {
  return StationaryTrajectory(kind_, path_.shifted_nodes(k), horizon_, rule_);
}

namespace {

// Weights for the forward integral over [0, U] of exp(-l u) dW(u), l > 0,
// indexed by j = 0..K-1 against the increment at node j.
std::vector<double> forward_weights(double l, double dt, long K, Quadrature q) {
  std::vector<double> w(static_cast<std::size_t>(K));
  const double a = 1.0 + l * dt;
  for (long j = 0; j < K; ++j) {
    w[j] = q == Quadrature::LeftPoint ? std::exp(-l * static_cast<double>(j) * dt)
                                      : std::pow(a, -static_cast<double>(j + 1));
  }
  return w;
}

// Weights for the backward integral over [-U, 0] of exp(-l u) dW(u), l < 0,
// indexed by j = 1..K against the increment at node -j (stored at j - 1).
std::vector<double> backward_weights(double l, double dt, long K, Quadrature q) {
  std::vector<double> w(static_cast<std::size_t>(K));
  const double a = 1.0 + l * dt;
  for (long j = 1; j <= K; ++j) {
    w[j - 1] = q == Quadrature::LeftPoint ? std::exp(l * static_cast<double>(j) * dt)
                                          : std::pow(a, static_cast<double>(j - 1));
  }
  return w;
}

double forward_sum(const NoisePath& p, int i, const std::vector<double>& w) {
  const auto inc = p.increments(i, 0, static_cast<long>(w.size()));
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * inc[j];
  return s;
}

double backward_sum(const NoisePath& p, int i, const std::vector<double>& w) {
  const long K = static_cast<long>(w.size());
  const auto inc = p.increments(i, -K, K);
  double s = 0.0;
  // node -j sits at span index K - j
  for (long j = 1; j <= K; ++j) s += w[j - 1] * inc[K - j];
  return s;
}

// Weight table cached for the grid step of the constructing path and
// rebuilt when the rule is applied to a path with another step.
struct WeightCache {
  double l;
  double horizon;
  Quadrature quad;
  bool forward;
  double dt;
  std::vector<double> w;

  // Returns the cached table, or fills `tmp` for a path with another step.
  const std::vector<double>& get(double path_dt, std::vector<double>& tmp) const {
    if (path_dt == dt) return w;
    const long K = grid_nodes(horizon, path_dt, "stationary horizon");
    tmp = forward ? forward_weights(l, path_dt, K, quad) : backward_weights(l, path_dt, K, quad);
    return tmp;
  }
};

std::shared_ptr<const WeightCache> make_cache(double l, double horizon, Quadrature q, bool forward, double dt) {
  const long K = grid_nodes(horizon, dt, "stationary horizon");
  auto c = std::make_shared<WeightCache>();
  c->l = l;
  c->horizon = horizon;
  c->quad = q;
  c->forward = forward;
  c->dt = dt;
  c->w = forward ? forward_weights(l, dt, K, q) : backward_weights(l, dt, K, q);
  return c;
}

void check_horizon(const NoisePath& path, double horizon) {
  if (!(horizon > 0.0)) throw InvalidArgument("truncation horizon must be positive");
  if (horizon > path.sampled_horizon() * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "truncation horizon " << horizon << " exceeds the path horizon " << path.sampled_horizon();
    throw WindowError(msg.str());
  }
}

}  // namespace

StationaryTrajectory fixed_point_stationary(const SdeSystem& sys, const NoisePath& path, const Vector& x0) {
  if (x0.size() != sys.dim()) throw InvalidArgument("fixed point has the wrong dimension");
  const double bn = sys.drift().value(x0).norm();
  if (bn > 1e-12) {
    std::ostringstream msg;
    msg << "x0 is not a fixed point: |b(x0)| = " << bn;
    throw InvalidArgument(msg.str());
  }
  for (int i = 0; i < sys.noise_dim(); ++i) {
    const double gn = sys.diffusion(i).value(x0).norm();
    if (gn > 1e-12) {
      std::ostringstream msg;
      msg << "x0 is not a fixed point: |g_" << (i + 1) << "(x0)| = " << gn;
      throw InvalidArgument(msg.str());
    }
  }
  // The Ito correction also vanishes there since g_i(x0) = 0.
  return StationaryTrajectory(StationaryKind::FixedPoint, path, 0.0, [x0](const NoisePath&) { return x0; });
}

StationaryTrajectory ou_stationary(const NoisePath& path, double lambda, double horizon, Quadrature quad,
                                   double sigma) {
  if (!(lambda > 0.0)) throw InvalidArgument("ou_stationary requires lambda > 0");
  if (path.noise_dim() != 1) throw InvalidArgument("ou_stationary needs a one-component path");
  check_horizon(path, horizon);
  if (quad == Quadrature::EulerConsistent && !(1.0 + lambda * path.dt() > 0.0)) {
    throw InvalidArgument("Euler-consistent weights need 1 + lambda dt > 0");
  }
  const auto cache = make_cache(lambda, horizon, quad, true, path.dt());
  return StationaryTrajectory(StationaryKind::OuIntegral, path, horizon, [cache, sigma](const NoisePath& p) {
    std::vector<double> tmp;
    Vector y(1);
    y[0] = -sigma * forward_sum(p, 0, cache->get(p.dt(), tmp));
    return y;
  });
}

StationaryTrajectory hyperbolic2d_stationary(const NoisePath& path, double l1, double l2, const Matrix& G,
                                             double horizon, Quadrature quad) {
  if (!(l2 < 0.0 && 0.0 < l1)) {
    std::ostringstream msg;
    msg << "hyperbolic2d_stationary requires l2 < 0 < l1, got l1 = " << l1 << ", l2 = " << l2;
    throw InvalidArgument(msg.str());
  }
  if (G.rows() != 2 || G.cols() != path.noise_dim()) throw InvalidArgument("G must be 2 x m");
  check_horizon(path, horizon);
  if (quad == Quadrature::EulerConsistent && std::abs(1.0 + l2 * path.dt()) >= 1.0) {
    throw InvalidArgument("Euler-consistent weights need |1 + l2 dt| < 1");
  }
  const auto up = make_cache(l1, horizon, quad, true, path.dt());
  const auto down = make_cache(l2, horizon, quad, false, path.dt());
  return StationaryTrajectory(StationaryKind::Hyperbolic2d, path, horizon, [up, down, G](const NoisePath& p) {
    std::vector<double> tmp;
    Vector y = Vector::Zero(2);
    for (int i = 0; i < p.noise_dim(); ++i) {
      if (G(0, i) != 0.0) y[0] -= G(0, i) * forward_sum(p, i, up->get(p.dt(), tmp));
      if (G(1, i) != 0.0) y[1] += G(1, i) * backward_sum(p, i, down->get(p.dt(), tmp));
    }
    return y;
  });
}

double stationarity_residual(const SdeSystem& sys, const NoisePath& path, const StationaryTrajectory& Y, double T) {
  const long n = path.node_of(T);
  if (n < 0) throw InvalidArgument("stationarity_residual requires T >= 0");
  path.require_nodes(0, n, "stationarity_residual");
  const EulerStepper stepper(sys, path);
  Vector x = Y.on(path);
  double worst = 0.0;
  for (long k = 0;; ++k) {
    const Vector y = k == 0 ? x : Y.on(path.shifted_nodes(k));
    worst = std::max(worst, (x - y).norm());
    if (k == n) break;
    x += stepper.increment(k, x);
  }
  return worst;
}

Diffeo identity_diffeo(int dim) {
  return {[](const Vector& y) { return y; }, [dim](const Vector&) -> Matrix { return Matrix::Identity(dim, dim); },
          [](const Vector& x) { return x; },
          [dim](const Vector&, const Vector&) -> Matrix { return Matrix::Zero(dim, dim); }};
}

Diffeo shear_diffeo(double c) {
  return {[c](const Vector& y) -> Vector {
            Vector x(2);
            x << y[0] + c * y[1] * y[1], y[1];
            return x;
          },
          [c](const Vector& y) -> Matrix {
            Matrix j(2, 2);
            j << 1.0, 2.0 * c * y[1], 0.0, 1.0;
            return j;
          },
          [c](const Vector& x) -> Vector {
            Vector y(2);
            y << x[0] - c * x[1] * x[1], x[1];
            return y;
          },
          [c](const Vector&, const Vector& v) -> Matrix {
            Matrix j = Matrix::Zero(2, 2);
            j(0, 1) = 2.0 * c * v[1];
            return j;
          }};
}

namespace {

// Dpsi f o psi^{-1} with its Jacobian (Dpsi Df + D2psi[., f]) Dpsi^{-1}.
VectorField push_forward(const VectorField& f, const Diffeo& d) {
  VectorField out;
  out.value = [f, d](const Vector& x) -> Vector {
    const Vector y = d.inverse(x);
    return d.dpsi(y) * f.value(y);
  };
  if (d.second) {
    out.jacobian = [f, d](const Vector& x) -> Matrix {
      const Vector y = d.inverse(x);
      const Vector fy = f.value(y);
      const Matrix dp = d.dpsi(y);
      Matrix jy = dp * f.jacobian(y);
      for (Eigen::Index k = 0; k < y.size(); ++k) {
        jy.col(k) += d.second(y, Vector::Unit(y.size(), k)) * fy;
      }
      return jy * Eigen::PartialPivLU<Matrix>(dp).inverse();
    };
  } else {
    out.jacobian = [value = out.value](const Vector& x) -> Matrix {
      return finite_difference_jacobian(value, x);
    };
  }
  return out;
}

}  // namespace

std::pair<SdeSystem, StationaryTrajectory> diffeo_transform(const SdeSystem& sys, const StationaryTrajectory& Y,
                                                            const Diffeo& d) {
  if (sys.convention() != Convention::Stratonovich) {
    throw InvalidArgument("diffeo_transform needs a Stratonovich system; convert '" + sys.name() + "' first");
  }
  if (!d.psi || !d.dpsi || !d.inverse) throw InvalidArgument("diffeomorphism needs psi, Dpsi and inverse");
  for (const auto& p : SdeSystem::probe_points(sys.dim(), 16, 777)) {
    const Vector q = 3.0 * p;
    const double err = (d.psi(d.inverse(q)) - q).norm();
    if (!(err <= 1e-10 * (1.0 + q.norm()))) {
      std::ostringstream msg;
      msg << "psi o psi^{-1} differs from the identity by " << err << " at a probe point";
      throw InvalidArgument(msg.str());
    }
  }
  std::vector<VectorField> diff;
  for (const auto& g : sys.diffusions()) diff.push_back(push_forward(g, d));
  SdeSystem out(sys.name() + "_image", sys.dim(), Convention::Stratonovich, push_forward(sys.drift(), d),
                std::move(diff), static_cast<bool>(d.second));
  StationaryTrajectory image(StationaryKind::DiffeoImage, Y.path(), Y.horizon(),
                             [rule = Y.rule(), psi = d.psi](const NoisePath& p) { return psi(rule(p)); });
  return {std::move(out).with_notes(sys.notes()), std::move(image)};
}

}  // namespace rds
