#include "rds/systems.hpp"

#include <set>

namespace rds {

namespace {

VectorField constant_field(const Vector& c) {
  const auto d = c.size();
  return {[c](const Vector&) -> Vector { return c; },
          [d](const Vector&) -> Matrix { return Matrix::Zero(d, d); },
          [d](const Vector&, const Vector&) -> Matrix { return Matrix::Zero(d, d); }};
}

VectorField linear_field(const Matrix& A, const Vector& c) {
  const auto d = A.rows();
  return {[A, c](const Vector& x) -> Vector { return A * x + c; },
          [A](const Vector&) -> Matrix { return A; },
          [d](const Vector&, const Vector&) -> Matrix { return Matrix::Zero(d, d); }};
}

constexpr const char* kAffineNote =
    "Affine coefficients: Jacobians are bounded and Lipschitz, but the drift itself is unbounded, so "
    "membership in the uniformly bounded coefficient class holds only locally. Documented, not checked.";

}  // namespace

SdeSystem make_ou(double lambda, double sigma) {
  Matrix A(1, 1);
  A << lambda;
  Vector g(1);
  g << sigma;
  return SdeSystem("ou", 1, Convention::Ito, linear_field(A, Vector::Zero(1)), {constant_field(g)})
      .with_notes(kAffineNote);
}

SdeSystem make_hyperbolic2d(double l1, double l2, const Matrix& G) {
  if (G.rows() != 2 || G.cols() != 2) throw InvalidArgument("hyperbolic2d: G must be 2x2");
  Matrix A = Matrix::Zero(2, 2);
  A(0, 0) = l1;
  A(1, 1) = l2;
  return SdeSystem("hyperbolic2d", 2, Convention::Ito, linear_field(A, Vector::Zero(2)),
                   {constant_field(G.col(0)), constant_field(G.col(1))})
      .with_notes(kAffineNote);
}

SdeSystem make_gbm(double sigma, double mu, Convention convention) {
  VectorField drift{[mu](const Vector& x) -> Vector { return mu * x; },
                    [mu](const Vector&) -> Matrix { return Matrix::Constant(1, 1, mu); },
                    [](const Vector&, const Vector&) -> Matrix { return Matrix::Zero(1, 1); }};
  VectorField diff{[sigma](const Vector& x) -> Vector { return sigma * x; },
                   [sigma](const Vector&) -> Matrix { return Matrix::Constant(1, 1, sigma); },
                   [](const Vector&, const Vector&) -> Matrix { return Matrix::Zero(1, 1); }};
  return SdeSystem("gbm", 1, convention, std::move(drift), {std::move(diff)})
      .with_notes("Linear multiplicative noise; fields are C-infinity with bounded derivatives but unbounded "
                  "values. Documented, not checked.");
}

SdeSystem make_sheared2d(double c, double l1, double l2, const Matrix& G) {
  if (G.rows() != 2 || G.cols() != 2) throw InvalidArgument("sheared2d: G must be 2x2");
  // psi(y) = (y1 + c y2^2, y2); drift D psi(y) A y and diffusions D psi(y) G e_i
  // written in x = psi(y), y = (x1 - c x2^2, x2).
  const double k = c * (2.0 * l2 - l1);
  VectorField drift{
      [l1, l2, k](const Vector& x) -> Vector {
        Vector r(2);
        r << l1 * x[0] + k * x[1] * x[1], l2 * x[1];
        return r;
      },
      [l1, l2, k](const Vector& x) -> Matrix {
        Matrix j(2, 2);
        j << l1, 2.0 * k * x[1], 0.0, l2;
        return j;
      },
      [k](const Vector&, const Vector& v) -> Matrix {
        Matrix j = Matrix::Zero(2, 2);
        j(0, 1) = 2.0 * k * v[1];
        return j;
      }};
  std::vector<VectorField> diff;
  for (int i = 0; i < 2; ++i) {
    const double top = G(0, i), bottom = G(1, i);
    diff.push_back({[c, top, bottom](const Vector& x) -> Vector {
                      Vector r(2);
                      r << top + 2.0 * c * x[1] * bottom, bottom;
                      return r;
                    },
                    [c, bottom](const Vector&) -> Matrix {
                      Matrix j = Matrix::Zero(2, 2);
                      j(0, 1) = 2.0 * c * bottom;
                      return j;
                    },
                    [](const Vector&, const Vector&) -> Matrix { return Matrix::Zero(2, 2); }});
  }
  return SdeSystem("sheared2d", 2, Convention::Stratonovich, std::move(drift), std::move(diff))
      .with_notes("Smooth image of an affine system under a polynomial diffeomorphism; coefficients grow "
                  "quadratically, so the uniform coefficient bounds hold only locally. Documented, not checked.");
}

SdeSystem make_affine(const Matrix& A, const Matrix& G, const Vector& c, std::string name) {
  const auto d = A.rows();
  if (A.cols() != d || G.rows() != d || c.size() != d || G.cols() < 1) {
    throw InvalidArgument("affine system: inconsistent coefficient shapes");
  }
  std::vector<VectorField> diff;
  for (Eigen::Index i = 0; i < G.cols(); ++i) diff.push_back(constant_field(G.col(i)));
  return SdeSystem(std::move(name), static_cast<int>(d), Convention::Ito, linear_field(A, c), std::move(diff))
      .with_notes(kAffineNote);
}

const std::vector<std::string>& builtin_system_names() {
  static const std::vector<std::string> names{"ou", "hyperbolic2d", "gbm", "sheared2d"};
  return names;
}

SdeSystem make_builtin(const std::string& id, const std::map<std::string, double>& params) {
  auto get = [&params](const char* key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  auto allow = [&params, &id](std::set<std::string> keys) {
    for (const auto& [k, v] : params) {
      if (!keys.count(k)) throw ConfigError("system '" + id + "': unknown parameter '" + k + "'");
    }
  };
  auto g_matrix = [&get](double g11, double g12, double g21, double g22) {
    Matrix G(2, 2);
    G << get("g11", g11), get("g12", g12), get("g21", g21), get("g22", g22);
    return G;
  };
  if (id == "ou") {
    allow({"lambda", "sigma"});
    return make_ou(get("lambda", 1.0), get("sigma", 1.0));
  }
  if (id == "hyperbolic2d") {
    allow({"l1", "l2", "g11", "g12", "g21", "g22"});
    return make_hyperbolic2d(get("l1", 1.0), get("l2", -1.0), g_matrix(1, 0, 0, 1));
  }
  if (id == "gbm") {
    allow({"sigma", "mu", "stratonovich"});
    return make_gbm(get("sigma", 1.0), get("mu", 0.0),
                    get("stratonovich", 0.0) != 0.0 ? Convention::Stratonovich : Convention::Ito);
  }
  if (id == "sheared2d") {
    allow({"c", "l1", "l2", "g11", "g12", "g21", "g22"});
    return make_sheared2d(get("c", 0.3), get("l1", 1.0), get("l2", -1.0), g_matrix(1, 0, 0, 0));
  }
  throw ConfigError("unknown system id '" + id + "'");
}

}  // namespace rds
