#pragma once

#include "rds/noise_path.hpp"
#include "rds/sde_system.hpp"

#include <functional>
#include <utility>

namespace rds {

enum class StationaryKind { FixedPoint, OuIntegral, Hyperbolic2d, DiffeoImage };

const char* to_string(StationaryKind k);

/// How improper stochastic integrals are truncated onto the path grid.
///
/// LeftPoint is the Riemann sum with weights exp(-lambda u) at the left end
/// of each interval. EulerConsistent uses the weights of the exact stationary
/// solution of the Euler recursion x' = (1 + lambda dt) x + dW, so that the
/// discrete flow maps the trajectory onto its shift up to truncation and
/// rounding only.
enum class Quadrature { LeftPoint, EulerConsistent };

const char* to_string(Quadrature q);

/// Y(omega) together with a rule for evaluating Y on any shifted view of
/// the noise, so Y(theta(t, omega)) is the same rule applied to path.shifted(t).
class StationaryTrajectory {
 public:
  using Rule = std::function<Vector(const NoisePath&)>;

  StationaryTrajectory(StationaryKind kind, NoisePath path, double horizon, Rule rule);

  StationaryKind kind() const noexcept { return kind_; }
  double horizon() const noexcept { return horizon_; }
  const NoisePath& path() const noexcept { return path_; }
  int dim() const noexcept { return static_cast<int>(anchor_.size()); }

  const Vector& anchor() const noexcept { return anchor_; }
  /// Y(theta(t, omega)) on the trajectory's own path.
  Vector at(double t) const { return at_node(path_.node_of(t)); }
  Vector at_node(long k) const { return k == 0 ? anchor_ : rule_(path_.shifted_nodes(k)); }
  /// The same rule applied to another noise sample.
  Vector on(const NoisePath& p) const { return rule_(p); }
  const Rule& rule() const noexcept { return rule_; }

  /// Y(theta(k dt, .)) as a trajectory in its own right.
  StationaryTrajectory shifted_nodes(long k) const;

 private:
  StationaryKind kind_;
  NoisePath path_;
  double horizon_;
  Rule rule_;
  Vector anchor_;
};

/// Y = x0; requires |b(x0)| and |g_i(x0)| <= 1e-12.
StationaryTrajectory fixed_point_stationary(const SdeSystem& sys, const NoisePath& path, const Vector& x0);

/// Y = -int_0^U exp(-lambda u) dW(u) for dx = lambda x dt + dW, lambda > 0.
StationaryTrajectory ou_stationary(const NoisePath& path, double lambda, double horizon,
                                   Quadrature quad = Quadrature::LeftPoint, double sigma = 1.0);

/// Stationary trajectory of dx = diag(l1, l2) x dt + G dW with l2 < 0 < l1:
/// Y1 = -sum_i G_1i int_0^U exp(-l1 u) dW_i(u),
/// Y2 =  sum_i G_2i int_{-U}^0 exp(-l2 u) dW_i(u).
StationaryTrajectory hyperbolic2d_stationary(const NoisePath& path, double l1, double l2, const Matrix& G,
                                             double horizon, Quadrature quad = Quadrature::LeftPoint);

/// sup over grid t in [0, T] of |phi(t, Y(omega), omega) - Y(theta(t, omega))|.
double stationarity_residual(const SdeSystem& sys, const NoisePath& path, const StationaryTrajectory& Y, double T);

/// Smooth change of coordinates x = psi(y).
struct Diffeo {
  std::function<Vector(const Vector&)> psi;
  std::function<Matrix(const Vector&)> dpsi;
  std::function<Vector(const Vector&)> inverse;
  /// Optional: d/ds Dpsi(y + s v) at s = 0.
  std::function<Matrix(const Vector&, const Vector&)> second;
};

Diffeo identity_diffeo(int dim);
/// psi(y) = (y1 + c y2^2, y2).
Diffeo shear_diffeo(double c);

/// Push a Stratonovich system and a stationary trajectory through psi.
/// Drift and diffusions become Dpsi f o psi^{-1}; the trajectory becomes psi o Y.
std::pair<SdeSystem, StationaryTrajectory> diffeo_transform(const SdeSystem& sys, const StationaryTrajectory& Y,
                                                            const Diffeo& d);

}  // namespace rds
