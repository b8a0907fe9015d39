#include "rds/sde_system.hpp"
#include "rds/systems.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rds;

namespace {

// dx = sin(x1) x2 dt + (x1 x2, cos x1) dW in R^2, with an exact Jacobian.
SdeSystem nonlinear(Convention c) {
  VectorField b{[](const Vector& x) -> Vector { return Vector::Constant(2, std::sin(x[0]) * x[1]); },
                [](const Vector& x) -> Matrix {
                  Matrix J(2, 2);
                  J << std::cos(x[0]) * x[1], std::sin(x[0]), std::cos(x[0]) * x[1], std::sin(x[0]);
                  return J;
                },
                {}};
  VectorField g{[](const Vector& x) -> Vector { return (Vector(2) << x[0] * x[1], std::cos(x[0])).finished(); },
                [](const Vector& x) -> Matrix {
                  Matrix J(2, 2);
                  J << x[1], x[0], -std::sin(x[0]), 0.0;
                  return J;
                },
                {}};
  return SdeSystem("nonlinear", 2, c, b, {g});
}

}  // namespace

TEST(SdeSystem, GbmCorrectionIsHalfSigmaSquaredX) {
  const double sigma = 0.7;
  const SdeSystem s = make_gbm(sigma, 0.0, Convention::Stratonovich);
  const SdeSystem i = stratonovich_to_ito(s);
  EXPECT_EQ(i.convention(), Convention::Ito);
  for (double x : {-2.0, 0.0, 0.3, 5.0}) {
    const Vector v = Vector::Constant(1, x);
    EXPECT_NEAR(i.drift().value(v)[0], 0.5 * sigma * sigma * x, 1e-15);
    EXPECT_NEAR(i.drift().jacobian(v)(0, 0), 0.5 * sigma * sigma, 1e-15);
  }
}

TEST(SdeSystem, HandDerivedCorrectionForNonlinearField) {
  // 1/2 Dg g with g = (x1 x2, cos x1): (x2 x1 x2 + x1 cos x1, -sin x1 x1 x2) / 2
  const SdeSystem s = nonlinear(Convention::Stratonovich);
  const Vector x = (Vector(2) << 0.4, -1.3).finished();
  const Vector c = s.half_dg_g(x);
  EXPECT_NEAR(c[0], 0.5 * (x[1] * x[0] * x[1] + x[0] * std::cos(x[0])), 1e-14);
  EXPECT_NEAR(c[1], 0.5 * (-std::sin(x[0]) * x[0] * x[1]), 1e-14);
}

TEST(SdeSystem, ConversionRoundTrip) {
  const SdeSystem s = nonlinear(Convention::Stratonovich);
  const SdeSystem back = ito_to_stratonovich(stratonovich_to_ito(s));
  for (const auto& x : SdeSystem::probe_points(2, 25)) {
    EXPECT_LE((back.drift().value(x) - s.drift().value(x)).norm(), 1e-14);
    EXPECT_LE((back.drift().jacobian(x) - s.drift().jacobian(x)).norm(), 1e-6);
  }
  EXPECT_EQ(ito_form(make_ou()).convention(), Convention::Ito);
}

TEST(SdeSystem, ConstantDiffusionHasNoCorrection) {
  const SdeSystem h = make_hyperbolic2d();
  const SdeSystem s = ito_to_stratonovich(h);
  for (const auto& x : SdeSystem::probe_points(2, 10)) {
    EXPECT_EQ(s.drift().value(x), h.drift().value(x));
  }
}

TEST(SdeSystem, WrongJacobianRejected) {
  VectorField b{[](const Vector& x) -> Vector { return x.array().square().matrix(); },
                [](const Vector& x) -> Matrix { return Matrix::Identity(x.size(), x.size()); }, {}};
  VectorField g{[](const Vector& x) -> Vector { return Vector::Ones(x.size()); },
                [](const Vector& x) -> Matrix { return Matrix::Zero(x.size(), x.size()); }, {}};
  try {
    SdeSystem("bad", 2, Convention::Ito, b, {g});
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("drift"), std::string::npos);
  }
}

TEST(SdeSystem, LocalCharacteristic) {
  const SdeSystem s = nonlinear(Convention::Ito);
  const Vector x = (Vector(2) << 0.2, 0.5).finished(), y = (Vector(2) << -1.0, 2.0).finished();
  const Vector gx = (Vector(2) << 0.1, std::cos(0.2)).finished();
  const Vector gy = (Vector(2) << -2.0, std::cos(-1.0)).finished();
  EXPECT_LE((local_characteristic_a(s, x, y) - gx * gy.transpose()).norm(), 1e-15);
}

TEST(SdeSystem, VariationalAugmentation) {
  const SdeSystem s = nonlinear(Convention::Ito);
  const SdeSystem a = augment_variational(s);
  EXPECT_EQ(a.dim(), 4);
  Vector z(4);
  z << 0.3, -0.2, 1.0, 2.0;
  const Vector x = z.head(2), v = z.tail(2);
  EXPECT_LE((a.drift().value(z).tail(2) - s.drift().jacobian(x) * v).norm(), 1e-15);
  EXPECT_LE((a.diffusion(0).value(z).tail(2) - s.diffusion(0).jacobian(x) * v).norm(), 1e-15);
}

TEST(Systems, BuiltinsValidateAndMatchFormulas) {
  for (const auto& id : builtin_system_names()) {
    const SdeSystem s = make_builtin(id);
    EXPECT_NO_THROW(s.validate(SdeSystem::probe_points(s.dim(), 20)));
  }
  const SdeSystem ou = make_builtin("ou", {{"lambda", 2.5}});
  EXPECT_DOUBLE_EQ(ou.drift().value(Vector::Constant(1, 2.0))[0], 5.0);
  EXPECT_THROW(make_builtin("ou", {{"lamda", 1.0}}), ConfigError);
  EXPECT_THROW(make_builtin("nope"), ConfigError);
}

TEST(Systems, ShearedIsImageOfLinear) {
  // psi(y) = (y1 + c y2^2, y2); with y' = (y1, -y2) and noise on y1 only,
  // x1' = y1 + 2c y2 (-y2) = (x1 - c x2^2) - 2c x2^2.
  const double c = 0.3;
  const SdeSystem s = make_sheared2d(c);
  const Vector x = (Vector(2) << 0.7, -0.4).finished();
  const Vector b = s.drift().value(x);
  EXPECT_NEAR(b[0], (x[0] - c * x[1] * x[1]) - 2.0 * c * x[1] * x[1], 1e-14);
  EXPECT_NEAR(b[1], -x[1], 1e-15);
  EXPECT_EQ(s.convention(), Convention::Stratonovich);
}
