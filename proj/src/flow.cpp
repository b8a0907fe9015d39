#include "rds/flow.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

namespace rds {

namespace {

constexpr int kNewtonMaxIterations = 50;
constexpr double kNewtonTolerance = 1e-12;

void require_finite(const Vector& x, long node) {
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << "integration blow-up: non-finite state at node " << node;
    throw BlowupError(msg.str(), node);
  }
}

}  // namespace

EulerStepper::EulerStepper(const SdeSystem& sys, const NoisePath& path) : ito_(ito_form(sys)), path_(path) {
  if (sys.noise_dim() != path.noise_dim()) {
    throw InvalidArgument("system '" + sys.name() + "' needs " + std::to_string(sys.noise_dim()) +
                          " noise components, path has " + std::to_string(path.noise_dim()));
  }
}

Vector EulerStepper::increment(long node, const Vector& x) const {
  Vector inc = ito_.drift().value(x) * path_.dt();
  const auto& g = ito_.diffusions();
  for (std::size_t i = 0; i < g.size(); ++i) inc += g[i].value(x) * path_.increment(static_cast<int>(i), node);
  return inc;
}

Matrix EulerStepper::step_jacobian(long node, const Vector& x) const {
  Matrix j = ito_.drift().jacobian(x) * path_.dt();
  const auto& g = ito_.diffusions();
  for (std::size_t i = 0; i < g.size(); ++i) j += g[i].jacobian(x) * path_.increment(static_cast<int>(i), node);
  j.diagonal().array() += 1.0;
  return j;
}

Vector EulerStepper::advance(long from, long to, Vector x) const {
  path_.require_nodes(from, to, "forward integration");
  for (long k = from; k < to; ++k) {
    x += increment(k, x);
    require_finite(x, k + 1);
  }
  return x;
}

Vector EulerStepper::invert_step(long node, const Vector& target) const {
  // Initial guess: one explicit backward step.
  Vector y = target - increment(node, target);
  Matrix jac = step_jacobian(node, y);
  Eigen::PartialPivLU<Matrix> lu(jac);
  Vector r = step(node, y) - target;
  double rnorm = r.norm();
  const double scale = 1.0 + target.norm();
  bool small_enough = false;
  for (int it = 0; it < kNewtonMaxIterations; ++it) {
    if (!r.allFinite()) break;
    const Vector delta = lu.solve(r);
    // Damped update: halve until the residual does not grow.
    double lambda = 1.0;
    Vector trial = y - delta;
    Vector rt = step(node, trial) - target;
    while (!(rt.norm() <= rnorm) && lambda > 1e-6 && rnorm > kNewtonTolerance * scale) {
      lambda *= 0.5;
      trial = y - lambda * delta;
      rt = step(node, trial) - target;
    }
    const double rt_norm = rt.norm();
    const double moved = (trial - y).norm();
    y = std::move(trial);
    // Converged once the residual meets tolerance and the last update is
    // at rounding level, so the inverse is as exact as the arithmetic allows.
    if (rt_norm <= kNewtonTolerance * scale) {
      if (small_enough || moved <= 1e-15 * (1.0 + y.norm())) return y;
      small_enough = true;
    }
    if (rt_norm > 0.25 * rnorm) {
      // Slow contraction: refresh the reused Jacobian.
      lu.compute(step_jacobian(node, y));
    }
    r = std::move(rt);
    rnorm = rt_norm;
    if (rnorm == 0.0) return y;
  }
  std::ostringstream msg;
  msg << "Newton inversion of the step at node " << node << " did not converge after " << kNewtonMaxIterations
      << " iterations (residual " << rnorm << "); the step Jacobian is near singular";
  throw NewtonError(msg.str(), node);
}

Vector EulerStepper::retreat(long from, long to, Vector target) const {
  path_.require_nodes(from, to, "backward integration");
  for (long k = to - 1; k >= from; --k) {
    target = invert_step(k, target);
    require_finite(target, k);
  }
  return target;
}

FlowTrajectory integrate_forward(const SdeSystem& sys, const NoisePath& path, double s, double t, const Vector& x) {
  if (x.size() != sys.dim()) throw InvalidArgument("initial point has the wrong dimension");
  const long ns = path.node_of(s), nt = path.node_of(t);
  if (nt < ns) throw InvalidArgument("integrate_forward requires s <= t");
  path.require_nodes(ns, nt, "integrate_forward");
  const EulerStepper stepper(sys, path);
  FlowTrajectory out{{}, {}, sys.name(), path.seed(), path.anchor()};
  out.times.reserve(static_cast<std::size_t>(nt - ns + 1));
  out.states.reserve(static_cast<std::size_t>(nt - ns + 1));
  Vector cur = x;
  out.times.push_back(path.time_of(ns));
  out.states.push_back(cur);
  for (long k = ns; k < nt; ++k) {
    cur += stepper.increment(k, cur);
    require_finite(cur, k + 1);
    out.times.push_back(path.time_of(k + 1));
    out.states.push_back(cur);
  }
  return out;
}

TangentTrajectory tangent_flow(const SdeSystem& sys, const NoisePath& path, double s, double t, const Vector& x) {
  if (x.size() != sys.dim()) throw InvalidArgument("initial point has the wrong dimension");
  const long ns = path.node_of(s), nt = path.node_of(t);
  if (nt < ns) throw InvalidArgument("tangent_flow requires s <= t");
  path.require_nodes(ns, nt, "tangent_flow");
  const EulerStepper stepper(sys, path);
  TangentTrajectory out;
  Vector cur = x;
  Matrix prod = Matrix::Identity(sys.dim(), sys.dim());
  out.times.push_back(path.time_of(ns));
  out.states.push_back(cur);
  out.matrices.push_back(prod);
  for (long k = ns; k < nt; ++k) {
    prod = stepper.step_jacobian(k, cur) * prod;
    cur += stepper.increment(k, cur);
    require_finite(cur, k + 1);
    out.times.push_back(path.time_of(k + 1));
    out.states.push_back(cur);
    out.matrices.push_back(prod);
  }
  return out;
}

FlowTrajectory integrate_backward(const SdeSystem& sys, const NoisePath& path, double t, const Vector& x) {
  if (x.size() != sys.dim()) throw InvalidArgument("initial point has the wrong dimension");
  const long nt = path.node_of(t);
  if (nt < 0) throw InvalidArgument("integrate_backward requires t >= 0");
  path.require_nodes(-nt, 0, "integrate_backward");
  const EulerStepper stepper(sys, path);
  FlowTrajectory out{{}, {}, sys.name(), path.seed(), path.anchor()};
  Vector cur = x;
  out.times.push_back(0.0);
  out.states.push_back(cur);
  for (long k = -1; k >= -nt; --k) {
    cur = stepper.invert_step(k, cur);
    require_finite(cur, k);
    out.times.push_back(path.time_of(k));
    out.states.push_back(cur);
  }
  return out;
}

TangentTrajectory backward_tangent_flow(const SdeSystem& sys, const NoisePath& path, double t, const Vector& x) {
  const FlowTrajectory back = integrate_backward(sys, path, t, x);
  const EulerStepper stepper(sys, path);
  TangentTrajectory out;
  Matrix prod = Matrix::Identity(sys.dim(), sys.dim());
  out.times.push_back(0.0);
  out.states.push_back(x);
  out.matrices.push_back(prod);
  for (std::size_t j = 1; j < back.states.size(); ++j) {
    const long node = -static_cast<long>(j);
    // back.states[j] sits at node, and is mapped by step `node` onto back.states[j - 1].
    prod = Eigen::PartialPivLU<Matrix>(stepper.step_jacobian(node, back.states[j])).inverse() * prod;
    out.times.push_back(back.times[j]);
    out.states.push_back(back.states[j]);
    out.matrices.push_back(prod);
  }
  return out;
}

double cocycle_residual(const SdeSystem& sys, const NoisePath& path, const Vector& x, double s, double t) {
  const long ns = path.node_of(s), nt = path.node_of(t);
  if (ns < 0 || nt < 0) throw InvalidArgument("cocycle_residual requires s, t >= 0");
  const EulerStepper stepper(sys, path);
  const Vector direct = stepper.advance(0, ns + nt, x);
  const Vector mid = stepper.advance(0, ns, x);
  const NoisePath shifted = path.shifted_nodes(ns);
  const EulerStepper shifted_stepper(sys, shifted);
  const Vector composed = shifted_stepper.advance(0, nt, mid);
  return (direct - composed).norm();
}

double tangent_chain_residual(const SdeSystem& sys, const NoisePath& path, const Vector& x, double s, double t) {
  const long ns = path.node_of(s), nt = path.node_of(t);
  const double ts = path.time_of(ns), tt = path.time_of(nt);
  const TangentTrajectory whole = tangent_flow(sys, path, 0.0, ts + tt, x);
  const TangentTrajectory first = tangent_flow(sys, path, 0.0, ts, x);
  const TangentTrajectory second = tangent_flow(sys, path.shifted_nodes(ns), 0.0, tt, first.states.back());
  const Matrix composed = second.terminal() * first.terminal();
  return (whole.terminal() - composed).norm() / std::max(1e-300, whole.terminal().norm());
}

void write_flow_csv(std::ostream& out, const FlowTrajectory& flow, const TangentTrajectory* tangent) {
  const auto d = flow.states.empty() ? 0 : flow.states.front().size();
  out << "t";
  for (Eigen::Index i = 0; i < d; ++i) out << ",x" << (i + 1);
  if (tangent) {
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) out << ",J" << (r + 1) << (c + 1);
  }
  out << "\n" << std::setprecision(17);
  for (std::size_t k = 0; k < flow.states.size(); ++k) {
    out << flow.times[k];
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << flow.states[k][i];
    if (tangent) {
      const Matrix& m = tangent->matrices.at(k);
      for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) out << ',' << m(r, c);
    }
    out << "\n";
  }
}

}  // namespace rds
