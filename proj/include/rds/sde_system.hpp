#pragma once

#include "rds/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rds {

enum class Convention { Ito, Stratonovich };

const char* to_string(Convention c);

/// A vector field on R^d with its Jacobian.
struct VectorField {
  std::function<Vector(const Vector&)> value;
  std::function<Matrix(const Vector&)> jacobian;
  /// Optional: d/ds Dg(x + s v) at s = 0. Needed for the Jacobian of the
  /// Ito correction and of variational systems; central differences of
  /// `jacobian` are used when absent.
  std::function<Matrix(const Vector&, const Vector&)> jacobian_derivative;

  Matrix jacobian_along(const Vector& x, const Vector& v) const;
};

/// Autonomous SDE  dx = b(x) dt + sum_i g_i(x) dW_i  in the Ito or
/// Stratonovich sense. Immutable; the evaluators must be pure.
class SdeSystem {
 public:
  /// Validates Jacobians against central differences on a fixed probe set
  /// unless `validate` is false.
  SdeSystem(std::string name, int dim, Convention convention, VectorField drift,
            std::vector<VectorField> diffusions, bool validate = true);

  const std::string& name() const noexcept { return name_; }
  int dim() const noexcept { return dim_; }
  int noise_dim() const noexcept { return static_cast<int>(diffusions_.size()); }
  Convention convention() const noexcept { return convention_; }
  const VectorField& drift() const noexcept { return drift_; }
  const VectorField& diffusion(int i) const { return diffusions_.at(static_cast<std::size_t>(i)); }
  const std::vector<VectorField>& diffusions() const noexcept { return diffusions_; }

  /// Free-form note on analytic hypotheses (coefficient classes) that are
  /// documented rather than checked.
  const std::string& notes() const noexcept { return notes_; }
  SdeSystem with_notes(std::string notes) const;
  SdeSystem renamed(std::string name) const;

  /// 1/2 sum_i Dg_i(x) g_i(x).
  Vector half_dg_g(const Vector& x) const;
  /// Jacobian of half_dg_g.
  Matrix half_dg_g_jacobian(const Vector& x) const;

  /// Throws InvalidArgument naming the field if any Jacobian disagrees
  /// with central differences by more than `tol` (relative).
  void validate(std::span<const Vector> probes, double tol = 1e-5) const;

  /// Deterministic probe points in [-1, 1]^d.
  static std::vector<Vector> probe_points(int dim, int count, std::uint64_t seed = 12345);

 private:
  std::string name_;
  int dim_;
  Convention convention_;
  VectorField drift_;
  std::vector<VectorField> diffusions_;
  std::string notes_;
};

/// a(x, y) = sum_i g_i(x) g_i(y)^T.
Matrix local_characteristic_a(const SdeSystem& sys, const Vector& x, const Vector& y);

/// b_I = b_S + 1/2 sum_i Dg_i g_i, same diffusions.
SdeSystem stratonovich_to_ito(const SdeSystem& sys);
/// b_S = b_I - 1/2 sum_i Dg_i g_i, same diffusions.
SdeSystem ito_to_stratonovich(const SdeSystem& sys);
/// Returns sys itself if already Ito, else its conversion.
SdeSystem ito_form(const SdeSystem& sys);

/// The 2d-dimensional system on (x, v) with drift (b, Db v) and diffusions
/// (g_i, Dg_i v). Convention preserved.
SdeSystem augment_variational(const SdeSystem& sys);

/// Central-difference Jacobian of f at x.
Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                                  double rel_step = 1e-6);

}  // namespace rds
