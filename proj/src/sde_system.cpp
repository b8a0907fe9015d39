#include "rds/sde_system.hpp"

#include "rds/rng.hpp"

#include <memory>
#include <sstream>

namespace rds {

const char* to_string(Convention c) { return c == Convention::Ito ? "ito" : "stratonovich"; }

Matrix VectorField::jacobian_along(const Vector& x, const Vector& v) const {
  if (jacobian_derivative) return jacobian_derivative(x, v);
  const double vn = v.norm();
  if (vn == 0.0) {
    const Matrix j = jacobian(x);
    return Matrix::Zero(j.rows(), j.cols());
  }
  const double h = 1e-5 * std::max(1.0, x.norm()) / vn;
  return (jacobian(x + h * v) - jacobian(x - h * v)) / (2.0 * h);
}

Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                                  double rel_step) {
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const double h = rel_step * std::max(1.0, std::abs(x[c]));
    Vector xp = x, xm = x;
    xp[c] += h;
    xm[c] -= h;
    j.col(c) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

SdeSystem::SdeSystem(std::string name, int dim, Convention convention, VectorField drift,
                     std::vector<VectorField> diffusions, bool validate_fields)
    : name_(std::move(name)),
      dim_(dim),
      convention_(convention),
      drift_(std::move(drift)),
      diffusions_(std::move(diffusions)) {
  if (dim_ < 1) throw InvalidArgument("system dimension must be positive");
  if (!drift_.value || !drift_.jacobian) throw InvalidArgument("drift needs value and Jacobian");
  for (const auto& g : diffusions_) {
    if (!g.value || !g.jacobian) throw InvalidArgument("diffusion needs value and Jacobian");
  }
  if (validate_fields) {
    const auto probes = probe_points(dim_, 8);
    validate(probes);
  }
}

SdeSystem SdeSystem::with_notes(std::string notes) const {
  SdeSystem copy = *this;
  copy.notes_ = std::move(notes);
  return copy;
}

SdeSystem SdeSystem::renamed(std::string name) const {
  SdeSystem copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

std::vector<Vector> SdeSystem::probe_points(int dim, int count, std::uint64_t seed) {
  NormalStream rng(seed, 7);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Vector p(dim);
    for (int i = 0; i < dim; ++i) p[i] = 2.0 * rng.uniform() - 1.0;
    out.push_back(std::move(p));
  }
  return out;
}

void SdeSystem::validate(std::span<const Vector> probes, double tol) const {
  auto check = [&](const VectorField& field, const std::string& label) {
    for (const Vector& x : probes) {
      const Vector fx = field.value(x);
      if (fx.size() != dim_ || !fx.allFinite()) {
        throw InvalidArgument(name_ + ": " + label + " is non-finite or has the wrong size at a probe point");
      }
      const Matrix j = field.jacobian(x);
      const Matrix fd = finite_difference_jacobian(field.value, x);
      const double err = (j - fd).norm() / std::max(1.0, j.norm());
      if (!(err <= tol)) {
        std::ostringstream msg;
        msg << name_ << ": Jacobian of " << label << " disagrees with central differences (relative error "
            << err << ")";
        throw InvalidArgument(msg.str());
      }
      if (field.jacobian_derivative) {
        Vector v = Vector::Ones(dim_) / std::sqrt(static_cast<double>(dim_));
        VectorField plain{field.value, field.jacobian, {}};
        const Matrix d2 = field.jacobian_derivative(x, v);
        const Matrix d2fd = plain.jacobian_along(x, v);
        const double e2 = (d2 - d2fd).norm() / std::max(1.0, d2.norm());
        if (!(e2 <= 1e-4)) {
          std::ostringstream msg;
          msg << name_ << ": second derivative of " << label << " disagrees with differences of its Jacobian ("
              << e2 << ")";
          throw InvalidArgument(msg.str());
        }
      }
    }
  };
  check(drift_, "drift");
  for (std::size_t i = 0; i < diffusions_.size(); ++i) check(diffusions_[i], "diffusion " + std::to_string(i + 1));
}

Vector SdeSystem::half_dg_g(const Vector& x) const {
  Vector c = Vector::Zero(dim_);
  for (const auto& g : diffusions_) c += g.jacobian(x) * g.value(x);
  return 0.5 * c;
}

Matrix SdeSystem::half_dg_g_jacobian(const Vector& x) const {
  Matrix j = Matrix::Zero(dim_, dim_);
  for (const auto& g : diffusions_) {
    const Matrix dg = g.jacobian(x);
    j += g.jacobian_along(x, g.value(x)) + dg * dg;
  }
  return 0.5 * j;
}

Matrix local_characteristic_a(const SdeSystem& sys, const Vector& x, const Vector& y) {
  Matrix a = Matrix::Zero(sys.dim(), sys.dim());
  for (const auto& g : sys.diffusions()) a += g.value(x) * g.value(y).transpose();
  return a;
}

namespace {

SdeSystem shift_drift(const SdeSystem& sys, double sign, Convention target) {
  // The converted drift keeps a handle on the source system so that the
  // correction uses the original evaluators.
  auto src = std::make_shared<const SdeSystem>(sys);
  VectorField drift;
  drift.value = [src, sign](const Vector& x) -> Vector {
    return src->drift().value(x) + sign * src->half_dg_g(x);
  };
  drift.jacobian = [src, sign](const Vector& x) -> Matrix {
    return src->drift().jacobian(x) + sign * src->half_dg_g_jacobian(x);
  };
  SdeSystem out(sys.name(), sys.dim(), target, std::move(drift), sys.diffusions(), false);
  return out.with_notes(sys.notes());
}

}  // namespace

SdeSystem stratonovich_to_ito(const SdeSystem& sys) {
  if (sys.convention() != Convention::Stratonovich) {
    throw InvalidArgument("stratonovich_to_ito: system '" + sys.name() + "' is already in Ito form");
  }
  return shift_drift(sys, +1.0, Convention::Ito);
}

SdeSystem ito_to_stratonovich(const SdeSystem& sys) {
  if (sys.convention() != Convention::Ito) {
    throw InvalidArgument("ito_to_stratonovich: system '" + sys.name() + "' is already in Stratonovich form");
  }
  return shift_drift(sys, -1.0, Convention::Stratonovich);
}

SdeSystem ito_form(const SdeSystem& sys) {
  return sys.convention() == Convention::Ito ? sys : stratonovich_to_ito(sys);
}

namespace {

VectorField augment_field(const VectorField& f, int d) {
  VectorField out;
  out.value = [f, d](const Vector& z) -> Vector {
    const Vector x = z.head(d);
    Vector r(2 * d);
    r.head(d) = f.value(x);
    r.tail(d) = f.jacobian(x) * z.tail(d);
    return r;
  };
  out.jacobian = [f, d](const Vector& z) -> Matrix {
    const Vector x = z.head(d);
    const Matrix j = f.jacobian(x);
    Matrix r = Matrix::Zero(2 * d, 2 * d);
    r.topLeftCorner(d, d) = j;
    r.bottomLeftCorner(d, d) = f.jacobian_along(x, z.tail(d));
    r.bottomRightCorner(d, d) = j;
    return r;
  };
  return out;
}

}  // namespace

SdeSystem augment_variational(const SdeSystem& sys) {
  const int d = sys.dim();
  std::vector<VectorField> diff;
  diff.reserve(sys.diffusions().size());
  for (const auto& g : sys.diffusions()) diff.push_back(augment_field(g, d));
  return SdeSystem(sys.name() + "+variational", 2 * d, sys.convention(), augment_field(sys.drift(), d),
                   std::move(diff), false);
}

}  // namespace rds
