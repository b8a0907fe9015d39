#include "rds/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace rds {

struct CenteredCocycle::Memo {
  std::mutex mu;
  std::unordered_map<long, Vector> values;
};

CenteredCocycle CenteredCocycle::create(const SdeSystem& sys, const NoisePath& path, const StationaryTrajectory& Y,
                                        double tolerance, double check_time) {
  if (Y.dim() != sys.dim()) throw InvalidArgument("stationary trajectory and system dimensions differ");
  const double res = stationarity_residual(sys, path, Y, check_time);
  if (!(res <= tolerance)) {
    std::ostringstream msg;
    msg << "stationarity residual " << res << " on [0, " << check_time << "] exceeds the tolerance " << tolerance
        << "; centering around this trajectory is meaningless";
    throw InvalidArgument(msg.str());
  }
  // Re-anchor Y on `path` itself so that node k of the cocycle is node k of Y.
  auto own = std::make_shared<const StationaryTrajectory>(Y.kind(), path, Y.horizon(), Y.rule());
  return CenteredCocycle(EulerStepper(sys, path), std::move(own), std::make_shared<Memo>(), res, 0);
}

Vector CenteredCocycle::Y(long node) const {
  const long key = offset_ + node;
  {
    std::lock_guard<std::mutex> lock(memo_->mu);
    const auto it = memo_->values.find(key);
    if (it != memo_->values.end()) return it->second;
  }
  Vector y = Y_->at_node(key);
  std::lock_guard<std::mutex> lock(memo_->mu);
  memo_->values.emplace(key, y);
  return y;
}

Vector CenteredCocycle::evaluate(long n, const Vector& x, long start) const {
  if (n == 0) return x;
  Vector s = x + Y(start);
  s = n > 0 ? stepper_.advance(start, start + n, std::move(s)) : stepper_.retreat(start + n, start, std::move(s));
  return s - Y(start + n);
}

std::vector<Vector> CenteredCocycle::orbit(long n, const Vector& x, long start) const {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(std::abs(n) + 1));
  out.push_back(x);
  Vector s = x + Y(start);
  if (n > 0) {
    stepper_.path().require_nodes(start, start + n, "cocycle orbit");
    for (long k = start; k < start + n; ++k) {
      s += stepper_.increment(k, s);
      if (!s.allFinite()) throw BlowupError("cocycle orbit blew up", k + 1);
      out.push_back(s - Y(k + 1));
    }
  } else {
    stepper_.path().require_nodes(start + n, start, "cocycle orbit");
    for (long k = start - 1; k >= start + n; --k) {
      s = stepper_.invert_step(k, s);
      out.push_back(s - Y(k));
    }
  }
  return out;
}

Matrix CenteredCocycle::tangent(long n, const Vector& x, long start) const {
  const int d = dim();
  Matrix prod = Matrix::Identity(d, d);
  if (n == 0) return prod;
  Vector s = x + Y(start);
  if (n > 0) {
    stepper_.path().require_nodes(start, start + n, "cocycle tangent");
    for (long k = start; k < start + n; ++k) {
      prod = stepper_.step_jacobian(k, s) * prod;
      s += stepper_.increment(k, s);
      if (!s.allFinite()) throw BlowupError("cocycle tangent blew up", k + 1);
    }
  } else {
    stepper_.path().require_nodes(start + n, start, "cocycle tangent");
    for (long k = start - 1; k >= start + n; --k) {
      s = stepper_.invert_step(k, s);
      prod = Eigen::PartialPivLU<Matrix>(stepper_.step_jacobian(k, s)).solve(prod);
    }
  }
  return prod;
}

CenteredCocycle CenteredCocycle::shifted_nodes(long k) const {
  return CenteredCocycle(EulerStepper(stepper_.system(), stepper_.path().shifted_nodes(k)), Y_, memo_, residual_,
                         offset_ + k);
}

LyapunovSpectrum cluster_exponents(std::vector<double> raw, double tau) {
  if (raw.empty()) throw InvalidArgument("empty spectrum");
  std::sort(raw.begin(), raw.end(), std::greater<>());
  LyapunovSpectrum out;
  out.raw = raw;
  out.tau = tau;
  double sum = raw[0];
  int count = 1;
  for (std::size_t i = 1; i <= raw.size(); ++i) {
    if (i < raw.size() && raw[i - 1] - raw[i] <= tau) {
      sum += raw[i];
      ++count;
      continue;
    }
    out.exponents.push_back(sum / count);
    out.multiplicities.push_back(count);
    if (i < raw.size()) {
      sum = raw[i];
      count = 1;
    }
  }
  return out;
}

namespace {

struct Blocks {
  long block_nodes;
  long count;
};

Blocks block_layout(const CenteredCocycle& Z, double T, double block) {
  const long nb = Z.path().node_of(block);
  const long nt = Z.path().node_of(T);
  if (nb <= 0 || nt <= 0) throw InvalidArgument("spectrum needs positive T and block");
  if (nt % nb != 0) {
    std::ostringstream msg;
    msg << "T = " << T << " is not an integer multiple of the block length " << block;
    throw InvalidArgument(msg.str());
  }
  return {nb, nt / nb};
}

std::vector<double> qr_rates(const CenteredCocycle& Z, const Blocks& b, int direction, double T) {
  const int d = Z.dim();
  Matrix Q = Matrix::Identity(d, d);
  std::vector<double> sums(static_cast<std::size_t>(d), 0.0);
  for (long n = 0; n < b.count; ++n) {
    const long start = direction * n * b.block_nodes;
    const Matrix M = Z.tangent(direction * b.block_nodes, Vector::Zero(d), start) * Q;
    Eigen::HouseholderQR<Matrix> qr(M);
    const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    Q = qr.householderQ() * Matrix::Identity(d, d);
    for (int i = 0; i < d; ++i) {
      const double r = std::abs(R(i, i));
      if (!(r >= 1e-300) || !std::isfinite(r)) {
        std::ostringstream msg;
        msg << "QR diagonal entry " << r << " in block " << n << " under- or overflows; use shorter blocks";
        throw NumericalError(msg.str());
      }
      sums[static_cast<std::size_t>(i)] += std::log(r);
    }
  }
  for (auto& s : sums) s /= T;
  return sums;
}

}  // namespace

LyapunovSpectrum lyapunov_spectrum(const CenteredCocycle& Z, double T, double block, double tau) {
  const Blocks b = block_layout(Z, T, block);
  const double total = static_cast<double>(b.count * b.block_nodes) * Z.path().dt();
  LyapunovSpectrum s = cluster_exponents(qr_rates(Z, b, 1, total), tau);
  s.block = block;
  s.total_time = total;
  return s;
}

LyapunovSpectrum backward_lyapunov_spectrum(const CenteredCocycle& Z, double T, double block, double tau) {
  const Blocks b = block_layout(Z, T, block);
  const double total = static_cast<double>(b.count * b.block_nodes) * Z.path().dt();
  LyapunovSpectrum s = cluster_exponents(qr_rates(Z, b, -1, total), tau);
  s.block = block;
  s.total_time = total;
  return s;
}

double log_det_rate(const CenteredCocycle& Z, double T, double block) {
  const Blocks b = block_layout(Z, T, block);
  double sum = 0.0;
  for (long n = 0; n < b.count; ++n) {
    sum += std::log(std::abs(Z.tangent(b.block_nodes, Vector::Zero(Z.dim()), n * b.block_nodes).determinant()));
  }
  return sum / (static_cast<double>(b.count * b.block_nodes) * Z.path().dt());
}

double trace_average(const CenteredCocycle& Z, double T, long stride) {
  const long nt = Z.path().node_of(T);
  if (nt <= 0) throw InvalidArgument("trace_average needs T > 0");
  if (stride < 1) throw InvalidArgument("stride must be positive");
  const auto& drift = Z.system().drift();
  double sum = 0.0;
  long count = 0;
  for (long k = 0; k < nt; k += stride, ++count) sum += drift.jacobian(Z.Y(k)).trace();
  return sum / static_cast<double>(count);
}

Matrix orthonormal_basis(const Matrix& A) {
  if (A.cols() == 0) return Matrix(A.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > 1e-12 * s[0]) ++rank;
  }
  return svd.matrixU().leftCols(rank);
}

double subspace_distance(const Matrix& A, const Matrix& B) {
  const Matrix Qa = orthonormal_basis(A), Qb = orthonormal_basis(B);
  if (Qa.cols() != Qb.cols()) {
    std::ostringstream msg;
    msg << "subspace dimensions differ: " << Qa.cols() << " vs " << Qb.cols();
    throw InvalidArgument(msg.str());
  }
  if (Qa.cols() == 0) return 0.0;
  // sine of the largest principal angle, accurate for small angles
  const Matrix residual = Qa - Qb * (Qb.transpose() * Qa);
  const double s = Eigen::JacobiSVD<Matrix>(residual).singularValues()[0];
  return std::asin(std::min(1.0, s));
}

double minimum_angle(const Matrix& A, const Matrix& B) {
  const Matrix Qa = orthonormal_basis(A), Qb = orthonormal_basis(B);
  if (Qa.cols() == 0 || Qb.cols() == 0) return M_PI / 2;
  const double c = Eigen::JacobiSVD<Matrix>(Qa.transpose() * Qb).singularValues()[0];
  return std::acos(std::min(1.0, c));
}

OseledecSplitting oseledec_subspaces(const CenteredCocycle& Z, double T, double gap) {
  const long nt = Z.path().node_of(T);
  if (nt <= 0) throw InvalidArgument("oseledec_subspaces needs T > 0");
  const double time = static_cast<double>(nt) * Z.path().dt();
  const int d = Z.dim();
  const Vector zero = Vector::Zero(d);
  OseledecSplitting out;
  out.gap = gap;

  auto rates_of = [&](const Eigen::JacobiSVD<Matrix>& svd, std::vector<double>& rates, const char* which) {
    const auto& s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double r = std::log(s[i]) / time;
      rates.push_back(r);
      if (!(std::abs(r) >= gap)) {
        std::ostringstream msg;
        msg << "ambiguous splitting: " << which << " singular value rate " << r << " lies within the gap " << gap
            << " of zero";
        throw NumericalError(msg.str());
      }
    }
  };

  const Eigen::JacobiSVD<Matrix> fwd(Z.tangent(nt, zero, 0), Eigen::ComputeFullU | Eigen::ComputeFullV);
  rates_of(fwd, out.forward_rates, "forward");
  std::vector<Eigen::Index> contracting;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (fwd.singularValues()[i] < 1.0) contracting.push_back(i);
  }
  out.stable = Matrix(d, static_cast<Eigen::Index>(contracting.size()));
  for (std::size_t j = 0; j < contracting.size(); ++j) out.stable.col(j) = fwd.matrixV().col(contracting[j]);

  const Eigen::JacobiSVD<Matrix> past(Z.tangent(nt, zero, -nt), Eigen::ComputeFullU | Eigen::ComputeFullV);
  rates_of(past, out.backward_rates, "backward");
  std::vector<Eigen::Index> expanding;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (past.singularValues()[i] > 1.0) expanding.push_back(i);
  }
  // Image of the expanding right singular vectors is spanned by the matching left ones.
  out.unstable = Matrix(d, static_cast<Eigen::Index>(expanding.size()));
  for (std::size_t j = 0; j < expanding.size(); ++j) out.unstable.col(j) = past.matrixU().col(expanding[j]);

  if (out.stable.cols() + out.unstable.cols() != d) {
    std::ostringstream msg;
    msg << "forward and backward windows disagree: dim S = " << out.stable.cols()
        << ", dim U = " << out.unstable.cols() << " in dimension " << d;
    throw NumericalError(msg.str());
  }
  return out;
}

Hyperbolicity hyperbolicity_check(const LyapunovSpectrum& spec, double gap) {
  Hyperbolicity h;
  h.hyperbolic = true;
  for (std::size_t i = 0; i < spec.exponents.size(); ++i) {
    const double l = spec.exponents[i];
    if (!(std::abs(l) > gap)) h.hyperbolic = false;
    if (l < 0.0) {
      if (h.i0 < 0) {
        h.i0 = static_cast<int>(i);
        h.lambda_i0 = l;
      }
      h.stable_dim += spec.multiplicities[i];
    } else {
      h.lambda_i0_minus_1 = l;
      h.unstable_dim += spec.multiplicities[i];
    }
  }
  return h;
}

LogMomentSummary log_moment_diagnostic(const CocycleFactory& factory, double T, int samples,
                                       std::uint64_t seed_base, long stride) {
  if (samples < 30) throw InvalidArgument("log_moment_diagnostic needs at least 30 samples");
  if (stride < 1) throw InvalidArgument("stride must be positive");
  auto opnorm = [](const Matrix& m) { return Eigen::JacobiSVD<Matrix>(m).singularValues()[0]; };
  LogMomentSummary out;
  for (int s = 0; s < samples; ++s) {
    const CenteredCocycle Z = factory(seed_base + static_cast<std::uint64_t>(s));
    const long n = Z.path().node_of(T);
    const int d = Z.dim();
    const auto& step = Z.stepper();
    double sup = 1.0;
    for (long t1 = -n; t1 <= n; t1 += stride) {
      Matrix J = Matrix::Identity(d, d);
      Vector x = Z.Y(t1);
      for (long k = t1; k < t1 + n; ++k) {
        J = step.step_jacobian(k, x) * J;
        x += step.increment(k, x);
        sup = std::max(sup, opnorm(J));
      }
      J.setIdentity();
      x = Z.Y(t1);
      for (long k = t1 - 1; k >= t1 - n; --k) {
        x = step.invert_step(k, x);
        J = Eigen::PartialPivLU<Matrix>(step.step_jacobian(k, x)).solve(J);
        sup = std::max(sup, opnorm(J));
      }
    }
    const double v = std::max(0.0, std::log(sup));
    out.finite = out.finite && std::isfinite(v);
    out.values.push_back(v);
  }
  const double n = static_cast<double>(out.values.size());
  out.mean = std::accumulate(out.values.begin(), out.values.end(), 0.0) / n;
  out.max = *std::max_element(out.values.begin(), out.values.end());
  double ss = 0.0;
  for (double v : out.values) ss += (v - out.mean) * (v - out.mean);
  out.variance = n > 1 ? ss / (n - 1) : 0.0;
  return out;
}

}  // namespace rds
