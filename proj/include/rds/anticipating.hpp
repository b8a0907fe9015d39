#pragma once

#include "rds/noise_path.hpp"
#include "rds/sde_system.hpp"

#include <functional>
#include <vector>

namespace rds {

/// F(t, x) = b(x) t + sum_i g_i(x) W_i(t) on the grid of a noise path.
/// The drift part V is optional; M is the sum over the diffusions.
struct SpatialField {
  NoisePath path;
  std::vector<VectorField> diffusions;
  VectorField drift;  // empty value means V = 0

  bool has_drift() const { return static_cast<bool>(drift.value); }

  Vector value(long node, const Vector& x) const;
  Matrix jacobian(long node, const Vector& x) const;
  /// F(to, x) - F(from, x), with W differences read directly from storage.
  Vector increment(long from, long to, const Vector& x) const;
  /// D2M(to, x) - D2M(from, x); the drift part is excluded.
  Matrix martingale_jacobian_increment(long from, long to, const Vector& x) const;
};

/// M(t, x) = sum_i g_i(x) W_i(t) of a system (drift dropped).
SpatialField martingale_field(const SdeSystem& sys, const NoisePath& path);
/// Full driving field b(x) t + M(t, x) of the system in its own convention.
SpatialField driving_field(const SdeSystem& sys, const NoisePath& path);

/// Nested partitions of [0, T] into grid nodes.
struct PartitionScheme {
  long total = 0;                           // T in grid nodes
  std::vector<std::vector<long>> levels;    // each runs 0 = t_0 < ... < t_n = total

  double mesh(std::size_t level, double dt) const;

  /// Level n = 1..count has stride finest_stride * 2^(count - n).
  static PartitionScheme dyadic(long total, int count, long finest_stride = 1);
  /// One level per stride, in the given order.
  static PartitionScheme every_kth(long total, const std::vector<long>& strides);
};

using Process = std::function<Vector(long node)>;
using ProcessField = std::function<Vector(long node, const Vector& x)>;

/// I_n(T) = sum_k [F(t_{k+1} ^ T, f(t_k)) - F(t_k ^ T, f(t_k))].
///
/// Consecutive intervals whose left values f(t_k) are bit-identical are
/// merged into a single difference, which is the same sum with fewer
/// roundings; a constant integrand therefore yields F(T, f) - F(0, f).
Vector ito_partition_sum(const SpatialField& M, const Process& f, const std::vector<long>& partition, long T);

/// C_n(T) = 1/2 sum_k [D2M(t_{k+1} ^ T, f(t_k)) - D2M(t_k ^ T, f(t_k))] [f(t_{k+1} ^ T) - f(t_k ^ T)].
Vector stratonovich_correction(const SpatialField& M, const Process& f, const std::vector<long>& partition, long T);

/// S_n = I_n + C_n.
Vector stratonovich_partition_sum(const SpatialField& M, const Process& f, const std::vector<long>& partition, long T);

/// Uniform tensor grid lo + i h, i = 0..count-1 per coordinate.
struct UniformGrid {
  Vector lo;
  Vector h;
  std::vector<int> count;

  int dim() const { return static_cast<int>(lo.size()); }
  Vector node(const std::vector<int>& index) const;
};

struct SubstitutionResult {
  double difference = 0.0;
  Vector interpolated;  // x -> I_n(T, x) on the grid, interpolated at Y
  Vector direct;        // I_n(T) with integrand f(t, Y)
};

/// Compares the field of partition sums evaluated at Y by multilinear
/// interpolation with the partition sum of the substituted integrand.
/// Exactly zero difference when Y is a grid node.
SubstitutionResult substitution_check(const SpatialField& M, const ProcessField& f, const Vector& Y,
                                      const std::vector<long>& partition, long T, const UniformGrid& grid,
                                      bool stratonovich = false);

/// |phi(T, Y) - Y - sum_k [F(t_{k+1}, phi(t_k, Y)) - F(t_k, phi(t_k, Y))]| with
/// phi the Euler flow of the Ito form and F its driving field. Zero exactly
/// when the partition is the full grid.
double anticipating_sde_residual(const SdeSystem& sys, const NoisePath& path, const Vector& Y,
                                 const std::vector<long>& partition, long T);

}  // namespace rds
