#pragma once

#include "rds/flow.hpp"
#include "rds/stationary.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

namespace rds {

/// Z(t, x, omega) = phi(t, x + Y(omega), omega) - Y(theta(t, omega)).
///
/// Times are grid nodes. `start` selects the base point theta(start dt, omega)
/// so that Z(n, x, theta(start)) can be evaluated without building shifted
/// copies. Y values are memoized and shared by every copy of the cocycle.
class CenteredCocycle {
 public:
  /// Throws InvalidArgument when the stationarity residual of Y on
  /// [0, check_time] exceeds `tolerance`.
  static CenteredCocycle create(const SdeSystem& sys, const NoisePath& path, const StationaryTrajectory& Y,
                                double tolerance = 0.05, double check_time = 1.0);

  const SdeSystem& system() const noexcept { return stepper_.system(); }
  const NoisePath& path() const noexcept { return stepper_.path(); }
  const EulerStepper& stepper() const noexcept { return stepper_; }
  const StationaryTrajectory& stationary() const noexcept { return *Y_; }
  int dim() const noexcept { return stepper_.dim(); }
  /// Residual measured at creation.
  double residual() const noexcept { return residual_; }

  /// Y(theta(node dt, omega)).
  Vector Y(long node) const;

  /// Z(n dt, x, theta(start dt, omega)); n may be negative (backward flow).
  Vector evaluate(long n, const Vector& x, long start = 0) const;
  Vector at(double t, const Vector& x) const { return evaluate(path().node_of(t), x); }
  /// D2 Z(n dt, x, theta(start dt, omega)) as a product of step Jacobians
  /// (of inverse steps when n < 0).
  Matrix tangent(long n, const Vector& x, long start = 0) const;

  /// Orbit Z(k, x, theta(start)) for k = 0..n (n >= 0) or k = 0, -1, ..., n (n < 0).
  std::vector<Vector> orbit(long n, const Vector& x, long start = 0) const;

  /// The cocycle over theta(k dt, omega).
  CenteredCocycle shifted_nodes(long k) const;

 private:
  struct Memo;
  CenteredCocycle(EulerStepper stepper, std::shared_ptr<const StationaryTrajectory> Y, std::shared_ptr<Memo> memo,
                  double residual, long offset)
      : stepper_(std::move(stepper)), Y_(std::move(Y)), memo_(std::move(memo)), residual_(residual), offset_(offset) {}

  EulerStepper stepper_;
  std::shared_ptr<const StationaryTrajectory> Y_;
  std::shared_ptr<Memo> memo_;
  double residual_;
  long offset_;  // node of this view relative to the stationary trajectory's path
};

struct LyapunovSpectrum {
  std::vector<double> raw;          // descending, one per dimension
  std::vector<double> exponents;    // cluster means, strictly decreasing
  std::vector<int> multiplicities;  // sums to d
  double tau = 0.1;
  double block = 1.0;
  double total_time = 0.0;
};

/// Group descending exponents whose consecutive gaps are at most tau.
LyapunovSpectrum cluster_exponents(std::vector<double> raw, double tau);

/// QR accumulation over the blocks D2Z(block, 0, theta((n-1) block)).
LyapunovSpectrum lyapunov_spectrum(const CenteredCocycle& Z, double T, double block = 1.0, double tau = 0.1);

/// Same estimator for the inverse tangent cocycle along negative time,
/// blocks D2Z(-block, 0, theta(-(n-1) block)).
LyapunovSpectrum backward_lyapunov_spectrum(const CenteredCocycle& Z, double T, double block = 1.0,
                                            double tau = 0.1);

/// (1/T) log|det D2Z| accumulated blockwise; equals the sum of the raw exponents.
double log_det_rate(const CenteredCocycle& Z, double T, double block = 1.0);

/// Average of tr(Db_I(Y(theta(k dt)))) over nodes k = 0, stride, 2 stride, ... < T / dt.
double trace_average(const CenteredCocycle& Z, double T, long stride = 1);

struct OseledecSplitting {
  Matrix stable;    // orthonormal columns
  Matrix unstable;  // orthonormal columns
  double gap = 0.0;
  std::vector<double> forward_rates;   // log(sigma)/T of D2Z(T, 0, omega)
  std::vector<double> backward_rates;  // log(sigma)/T of D2Z(T, 0, theta(-T, omega))
};

/// Finite-time singular-vector proxies: S from the contracting right
/// singular vectors of D2Z(T, 0, omega), U from the expanding directions of
/// D2Z(T, 0, theta(-T, omega)) pushed forward to omega.
/// Throws NumericalError when some |log sigma| / T falls below `gap`.
OseledecSplitting oseledec_subspaces(const CenteredCocycle& Z, double T, double gap = 0.1);

/// Largest principal angle between two subspaces of equal dimension, in radians.
double subspace_distance(const Matrix& A, const Matrix& B);
/// Smallest principal angle between two subspaces, in radians.
double minimum_angle(const Matrix& A, const Matrix& B);
/// Orthonormal basis of the column span.
Matrix orthonormal_basis(const Matrix& A);

struct Hyperbolicity {
  bool hyperbolic = false;
  /// Index (0-based, into exponents) of the largest negative exponent, -1 if none.
  int i0 = -1;
  /// Largest negative exponent; -infinity when every exponent is positive.
  double lambda_i0 = -std::numeric_limits<double>::infinity();
  /// Smallest positive exponent; +infinity when every exponent is negative.
  double lambda_i0_minus_1 = std::numeric_limits<double>::infinity();
  int stable_dim = 0;
  int unstable_dim = 0;
};

Hyperbolicity hyperbolicity_check(const LyapunovSpectrum& spec, double gap = 0.1);

struct LogMomentSummary {
  std::vector<double> values;  // per seed
  double mean = 0.0;
  double max = 0.0;
  double variance = 0.0;
  bool finite = true;
};

using CocycleFactory = std::function<CenteredCocycle(std::uint64_t seed)>;

/// log+ of sup over |t1|, |t2| <= T of |D2phi(t2, Y(theta(t1)))| (operator norm),
/// t1 on every `stride`-th node, per seed.
LogMomentSummary log_moment_diagnostic(const CocycleFactory& factory, double T, int samples,
                                       std::uint64_t seed_base = 1, long stride = 10);

}  // namespace rds
