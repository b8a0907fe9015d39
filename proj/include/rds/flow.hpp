#pragma once

#include "rds/noise_path.hpp"
#include "rds/sde_system.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace rds {

struct FlowTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::string system;
  std::uint64_t path_seed = 0;
  long path_anchor = 0;

  const Vector& initial() const { return states.front(); }
  const Vector& terminal() const { return states.back(); }
};

struct TangentTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Matrix> matrices;

  const Matrix& terminal() const { return matrices.back(); }
};

/// Euler-Maruyama map of the Ito form of a system, locked to a path grid.
///
/// Step k maps x at relative node k to x + (b(x) dt + sum_i g_i(x) dW_i(k)).
/// Because the increments are read from the path's shared storage, every
/// shifted view replays exactly the same steps, which makes the discrete
/// cocycle and tangent chain rule hold to rounding.
class EulerStepper {
 public:
  EulerStepper(const SdeSystem& sys, const NoisePath& path);

  const SdeSystem& system() const noexcept { return ito_; }
  const NoisePath& path() const noexcept { return path_; }
  int dim() const noexcept { return ito_.dim(); }

  /// b(x) dt + sum_i g_i(x) dW_i over [node, node + 1].
  Vector increment(long node, const Vector& x) const;
  Vector step(long node, const Vector& x) const { return x + increment(node, x); }
  /// I + dt Db(x) + sum_i dW_i Dg_i(x).
  Matrix step_jacobian(long node, const Vector& x) const;

  /// Forward orbit from node `from` to node `to`; throws BlowupError.
  Vector advance(long from, long to, Vector x) const;
  /// Inverse of step(node, .) by Newton; throws NewtonError.
  Vector invert_step(long node, const Vector& target) const;
  /// phi^{-1} over [from, to]: the point at node `from` mapped to `target` at `to`.
  Vector retreat(long from, long to, Vector target) const;

 private:
  SdeSystem ito_;
  NoisePath path_;
};

/// phi_{s,t}(x) on the grid nodes of [s, t].
FlowTrajectory integrate_forward(const SdeSystem& sys, const NoisePath& path, double s, double t, const Vector& x);

/// Jacobians D2 phi_{s,u}(x) for u in [s, t] as products of step Jacobians.
TangentTrajectory tangent_flow(const SdeSystem& sys, const NoisePath& path, double s, double t, const Vector& x);

/// phi(-u, x) for u in [0, t], node by node as the Newton inverse of the
/// forward step. times run 0, -dt, ..., -t.
FlowTrajectory integrate_backward(const SdeSystem& sys, const NoisePath& path, double t, const Vector& x);

/// D2 phi(-u, x) for u in [0, t]: products of inverse step Jacobians along
/// the backward orbit.
TangentTrajectory backward_tangent_flow(const SdeSystem& sys, const NoisePath& path, double t, const Vector& x);

/// |phi(t + s, x, w) - phi(t, phi(s, x, w), theta(s, w))|.
double cocycle_residual(const SdeSystem& sys, const NoisePath& path, const Vector& x, double s, double t);

/// Relative Frobenius mismatch of D2phi(t+s, x) against
/// D2phi(t, phi(s, x), theta(s)) D2phi(s, x).
double tangent_chain_residual(const SdeSystem& sys, const NoisePath& path, const Vector& x, double s, double t);

/// CSV with columns t, x1..xd and, when a tangent is given, J11..Jdd (row major).
void write_flow_csv(std::ostream& out, const FlowTrajectory& flow, const TangentTrajectory* tangent = nullptr);

}  // namespace rds
