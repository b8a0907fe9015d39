#include "rds/anticipating.hpp"

#include "rds/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rds {

Vector SpatialField::value(long node, const Vector& x) const {
  Vector out = has_drift() ? Vector(drift.value(x) * path.time_of(node)) : Vector::Zero(x.size());
  for (std::size_t i = 0; i < diffusions.size(); ++i) {
    out += diffusions[i].value(x) * path.value(static_cast<int>(i), node);
  }
  return out;
}

Matrix SpatialField::jacobian(long node, const Vector& x) const {
  Matrix out = has_drift() ? Matrix(drift.jacobian(x) * path.time_of(node)) : Matrix::Zero(x.size(), x.size());
  for (std::size_t i = 0; i < diffusions.size(); ++i) {
    out += diffusions[i].jacobian(x) * path.value(static_cast<int>(i), node);
  }
  return out;
}

Vector SpatialField::increment(long from, long to, const Vector& x) const {
  // Same arithmetic as the Euler step when to = from + 1: b(x) dt, then
  // += g_i(x) dW_i in component order.
  Vector out = has_drift() ? Vector(drift.value(x) * (static_cast<double>(to - from) * path.dt()))
                           : Vector::Zero(x.size());
  for (std::size_t i = 0; i < diffusions.size(); ++i) {
    out += diffusions[i].value(x) * path.difference(static_cast<int>(i), from, to);
  }
  return out;
}

Matrix SpatialField::martingale_jacobian_increment(long from, long to, const Vector& x) const {
  Matrix out = Matrix::Zero(x.size(), x.size());
  for (std::size_t i = 0; i < diffusions.size(); ++i) {
    out += diffusions[i].jacobian(x) * path.difference(static_cast<int>(i), from, to);
  }
  return out;
}

SpatialField martingale_field(const SdeSystem& sys, const NoisePath& path) {
  if (sys.noise_dim() != path.noise_dim()) throw InvalidArgument("noise dimension mismatch");
  return {path, sys.diffusions(), {}};
}

SpatialField driving_field(const SdeSystem& sys, const NoisePath& path) {
  if (sys.noise_dim() != path.noise_dim()) throw InvalidArgument("noise dimension mismatch");
  return {path, sys.diffusions(), sys.drift()};
}

double PartitionScheme::mesh(std::size_t level, double dt) const {
  const auto& p = levels.at(level);
  long widest = 0;
  for (std::size_t k = 1; k < p.size(); ++k) widest = std::max(widest, p[k] - p[k - 1]);
  return static_cast<double>(widest) * dt;
}

namespace {

std::vector<long> strided(long total, long stride) {
  if (stride < 1 || total % stride != 0) {
    std::ostringstream msg;
    msg << "stride " << stride << " does not divide the " << total << " grid steps of [0, T]";
    throw GridError(msg.str());
  }
  std::vector<long> nodes;
  for (long k = 0; k <= total; k += stride) nodes.push_back(k);
  return nodes;
}

void check_partition(const std::vector<long>& p) {
  if (p.size() < 2 || p.front() != 0) throw InvalidArgument("partition must start at node 0 and have an interval");
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (p[k] <= p[k - 1]) throw InvalidArgument("partition nodes must increase strictly");
  }
}

}  // namespace

PartitionScheme PartitionScheme::dyadic(long total, int count, long finest_stride) {
  if (count < 1) throw InvalidArgument("dyadic scheme needs at least one level");
  PartitionScheme s;
  s.total = total;
  for (int n = 1; n <= count; ++n) s.levels.push_back(strided(total, finest_stride << (count - n)));
  return s;
}

PartitionScheme PartitionScheme::every_kth(long total, const std::vector<long>& strides) {
  PartitionScheme s;
  s.total = total;
  for (long k : strides) s.levels.push_back(strided(total, k));
  return s;
}

Vector ito_partition_sum(const SpatialField& M, const Process& f, const std::vector<long>& partition, long T) {
  check_partition(partition);
  Vector sum;
  Vector run_value;
  long run_start = 0, run_end = 0;
  bool open = false;
  auto flush = [&]() {
    if (!open || run_end == run_start) return;
    const Vector term = M.increment(run_start, run_end, run_value);
    if (sum.size() == 0) {
      sum = term;
    } else {
      sum += term;
    }
  };
  for (std::size_t k = 0; k + 1 < partition.size(); ++k) {
    const long a = std::min(partition[k], T), b = std::min(partition[k + 1], T);
    if (a == b) break;
    const Vector x = f(partition[k]);
    if (open && run_end == a && x.size() == run_value.size() && (x.array() == run_value.array()).all()) {
      run_end = b;
      continue;
    }
    flush();
    run_value = x;
    run_start = a;
    run_end = b;
    open = true;
  }
  flush();
  if (sum.size() == 0) sum = Vector::Zero(open ? run_value.size() : f(0).size());
  return sum;
}

Vector stratonovich_correction(const SpatialField& M, const Process& f, const std::vector<long>& partition, long T) {
  check_partition(partition);
  Vector sum;
  for (std::size_t k = 0; k + 1 < partition.size(); ++k) {
    const long a = std::min(partition[k], T), b = std::min(partition[k + 1], T);
    if (a == b) break;
    const Vector fa = f(a);
    const Vector df = f(b) - fa;
    const Vector term = M.martingale_jacobian_increment(a, b, fa) * df;
    if (sum.size() == 0) {
      sum = term;
    } else {
      sum += term;
    }
  }
  if (sum.size() == 0) sum = Vector::Zero(f(0).size());
  return 0.5 * sum;
}

Vector stratonovich_partition_sum(const SpatialField& M, const Process& f, const std::vector<long>& partition, long T) {
  return ito_partition_sum(M, f, partition, T) + stratonovich_correction(M, f, partition, T);
}

Vector UniformGrid::node(const std::vector<int>& index) const {
  Vector x(dim());
  for (int j = 0; j < dim(); ++j) x[j] = lo[j] + static_cast<double>(index[static_cast<std::size_t>(j)]) * h[j];
  return x;
}

SubstitutionResult substitution_check(const SpatialField& M, const ProcessField& f, const Vector& Y,
                                      const std::vector<long>& partition, long T, const UniformGrid& grid,
                                      bool stratonovich) {
  const int d = grid.dim();
  if (Y.size() != d) throw InvalidArgument("Y and the grid have different dimensions");
  std::vector<int> cell(static_cast<std::size_t>(d));
  std::vector<double> frac(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    const int n = grid.count[static_cast<std::size_t>(j)];
    const double hi = grid.lo[j] + static_cast<double>(n - 1) * grid.h[j];
    if (!(Y[j] >= grid.lo[j] && Y[j] <= hi)) {
      std::ostringstream msg;
      msg << "Y[" << j << "] = " << Y[j] << " lies outside the grid hull [" << grid.lo[j] << ", " << hi << "]";
      throw InvalidArgument(msg.str());
    }
    int i = std::clamp(static_cast<int>(std::floor((Y[j] - grid.lo[j]) / grid.h[j])), 0, std::max(0, n - 2));
    const double at_i = grid.lo[j] + static_cast<double>(i) * grid.h[j];
    const double at_next = grid.lo[j] + static_cast<double>(i + 1) * grid.h[j];
    double t;
    if (Y[j] == at_i) {
      t = 0.0;
    } else if (Y[j] == at_next) {
      ++i;
      t = 0.0;
    } else {
      t = (Y[j] - at_i) / grid.h[j];
    }
    cell[static_cast<std::size_t>(j)] = i;
    frac[static_cast<std::size_t>(j)] = t;
  }

  auto sum_at = [&](const Vector& x) {
    const Process fx = [&f, &x](long node) { return f(node, x); };
    return stratonovich ? stratonovich_partition_sum(M, fx, partition, T) : ito_partition_sum(M, fx, partition, T);
  };

  SubstitutionResult out;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    std::vector<int> index = cell;
    bool skip = false;
    for (int j = 0; j < d; ++j) {
      const double t = frac[static_cast<std::size_t>(j)];
      if (corner & (1 << j)) {
        if (t == 0.0) skip = true;
        w *= t;
        ++index[static_cast<std::size_t>(j)];
      } else {
        w *= 1.0 - t;
      }
    }
    if (skip) continue;
    const Vector value = sum_at(grid.node(index));
    if (out.interpolated.size() == 0) {
      out.interpolated = w * value;
    } else {
      out.interpolated += w * value;
    }
  }
  out.direct = sum_at(Y);
  out.difference = (out.interpolated - out.direct).norm();
  return out;
}

double anticipating_sde_residual(const SdeSystem& sys, const NoisePath& path, const Vector& Y,
                                 const std::vector<long>& partition, long T) {
  check_partition(partition);
  if (partition.back() < T) throw InvalidArgument("partition does not reach T");
  const SdeSystem ito = ito_form(sys);
  const EulerStepper stepper(ito, path);
  const SpatialField F = driving_field(ito, path);
  path.require_nodes(0, T, "anticipating_sde_residual");
  // Euler states at every node of [0, T].
  std::vector<Vector> phi{Y};
  phi.reserve(static_cast<std::size_t>(T + 1));
  for (long k = 0; k < T; ++k) {
    Vector next = phi.back();
    next += stepper.increment(k, next);
    if (!next.allFinite()) throw BlowupError("anticipating residual: flow blew up", k + 1);
    phi.push_back(std::move(next));
  }
  Vector r = Y;
  for (std::size_t k = 0; k + 1 < partition.size(); ++k) {
    const long a = partition[k], b = std::min(partition[k + 1], T);
    if (a >= T) break;
    r += F.increment(a, b, phi[static_cast<std::size_t>(a)]);
  }
  return (phi.back() - r).norm();
}

}  // namespace rds
