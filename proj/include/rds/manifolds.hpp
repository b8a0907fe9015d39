#pragma once

#include "rds/ergodic.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace rds {

enum class Side { Stable, Unstable };

const char* to_string(Side s);

struct ManifoldParams {
  double rho = 0.5;
  double beta = 1.0;
  double eps = 0.5;
  int N = 20;  // integer times 0..N
  Side side = Side::Stable;
};

/// Envelope exponent: lambda_i0 + eps (stable) or -lambda_{i0-1} + eps (unstable).
double envelope_rate(const Hyperbolicity& h, const ManifoldParams& p);

/// Throws InvalidArgument unless rho, beta, eps > 0, beta > rho, N >= 1 and
/// the envelope rate is negative.
void check_params(const Hyperbolicity& h, const ManifoldParams& p);

/// max over integer n in [0, N] of |Z(+-n, 0)| exp(-rate n): the smallest beta
/// for which the anchor passes the membership test.
double residual_ceiling(const CenteredCocycle& Z, const Hyperbolicity& h, const ManifoldParams& p);

/// Defaults: eps = half the distance of the relevant exponent to zero,
/// beta = 10 x residual ceiling and rho = beta / 2. When rho is fixed by the
/// caller, beta = max(10 x ceiling, 2 rho).
ManifoldParams default_params(const CenteredCocycle& Z, const LyapunovSpectrum& spec, Side side,
                              std::optional<double> rho = std::nullopt, int N = 20);

struct ManifoldEstimate {
  Vector anchor;                  // Y(omega)
  std::vector<Vector> members;    // centered coordinates
  std::vector<Vector> rejected;   // centered coordinates
  std::vector<bool> blowup;       // per rejected point
  std::vector<double> slopes;     // per member; NaN when no pre-floor window exists
  ManifoldParams params;
  int expected_dim = 0;           // multiplicity sum of the relevant cluster
  Matrix tangent;                 // filled by tangent_estimate
};

/// Samples in centered coordinates: the anchor, `uniform` points uniform in
/// the ball of radius rho, and `per_needle` points on each coordinate axis.
std::vector<Vector> ball_and_needle_samples(int dim, double rho, int uniform, int per_needle, std::uint64_t seed);

/// Points on the finite-time estimate of the manifold: for offsets s along
/// `along`, bisection in r on the segment s*along + r*across (|r| <= rho)
/// for a sign change of <Z(+-T, x), probe>, where probe is the leading
/// expanding direction at time +-T. Points outside the ball are dropped.
std::vector<Vector> bisection_samples(const CenteredCocycle& Z, Side side, const Vector& along, const Vector& across,
                                      double rho, int count, double T);

ManifoldEstimate classify_stable(const CenteredCocycle& Z, const LyapunovSpectrum& spec, const ManifoldParams& p,
                                 const std::vector<Vector>& samples);
ManifoldEstimate classify_unstable(const CenteredCocycle& Z, const LyapunovSpectrum& spec, const ManifoldParams& p,
                                   const std::vector<Vector>& samples);

/// Membership of one centered point; `blowup` reports a failed flow.
bool is_member(const CenteredCocycle& Z, const Hyperbolicity& h, const ManifoldParams& p, const Vector& x,
               bool* blowup = nullptr);

/// Least-squares slope of log|Z(t, x)| over grid times in [T/2, T] (negative
/// T uses the backward flow and |t|). -infinity when |Z| vanishes there.
double decay_rate(const CenteredCocycle& Z, const Vector& x, double T);

struct RatePair {
  double integer_slope = 0.0;  // over integer times
  double grid_slope = 0.0;     // over all grid times in the same window
  double window = 0.0;         // length of the pre-floor window used
};

/// Slopes of log|Z(+-t, x)| restricted to the window where |Z(t, x)| stays at
/// least 100 times above the anchor floor |Z(t, 0)|, up to time N.
RatePair rate_consistency(const CenteredCocycle& Z, const Vector& x, int N, Side side);

/// Slope over integer times t in [0, T] of log max over member pairs of
/// |Z(t, x1) - Z(t, x2)| / |x1 - x2|.
double lipschitz_rate(const CenteredCocycle& Z, const ManifoldEstimate& est, double T);

/// Principal directions of members within rho/4 of the anchor; stores and
/// returns `expected_dim` orthonormal columns.
Matrix tangent_estimate(ManifoldEstimate& est);

/// Fraction of members x whose image Z(+-t, x) passes the membership test
/// on the shifted cocycle with the same parameters.
double invariance_check(const CenteredCocycle& Z, const LyapunovSpectrum& spec, const ManifoldEstimate& est, double t);

/// Minimal principal angle between the two tangent estimates (radians).
double transversality_check(const ManifoldEstimate& stable, const ManifoldEstimate& unstable);

/// d*(A, B) = max(sup_{a in A} d(a, B), sup_{b in B} d(b, A)).
double hausdorff_distance(const std::vector<Vector>& A, const std::vector<Vector>& B);

struct PullbackResult {
  std::vector<std::vector<Vector>> sets;  // sets[n] for n = 0..n_max, increasing
  int failures = 0;                       // points whose inverse flow failed
};

/// Union over n of phi(-n, .) applied to the stable estimate at theta(n).
PullbackResult global_stable_pullback(const CenteredCocycle& Z, const LyapunovSpectrum& spec,
                                      const ManifoldEstimate& local, const std::vector<Vector>& samples, int n_max);

}  // namespace rds
