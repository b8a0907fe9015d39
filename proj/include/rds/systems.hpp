#pragma once

#include "rds/sde_system.hpp"

#include <map>
#include <string>
#include <vector>

namespace rds {

/// dx = lambda x dt + sigma dW (d = m = 1).
SdeSystem make_ou(double lambda = 1.0, double sigma = 1.0);

/// dx = diag(l1, l2) x dt + G dW (d = m = 2).
SdeSystem make_hyperbolic2d(double l1 = 1.0, double l2 = -1.0, const Matrix& G = Matrix::Identity(2, 2));

/// dx = mu x dt + sigma x dW in the given convention (d = m = 1).
SdeSystem make_gbm(double sigma = 1.0, double mu = 0.0, Convention convention = Convention::Ito);

/// Stratonovich image of hyperbolic2d under psi(x1, x2) = (x1 + c x2^2, x2).
/// Default G = [[1, 0], [0, 0]] keeps the contracting coordinate noise-free.
SdeSystem make_sheared2d(double c = 0.3, double l1 = 1.0, double l2 = -1.0,
                         const Matrix& G = (Matrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished());

/// dx = (A x + c) dt + G dW, Ito.
SdeSystem make_affine(const Matrix& A, const Matrix& G, const Vector& c, std::string name = "affine");

/// Ids of the registry entries, in a fixed order.
const std::vector<std::string>& builtin_system_names();

/// Look up a built-in by id. Recognised numeric parameters: lambda, sigma,
/// mu, l1, l2, c, g11, g12, g21, g22; convention via `stratonovich` = 1.
/// Throws ConfigError for unknown ids or parameters.
SdeSystem make_builtin(const std::string& id, const std::map<std::string, double>& params = {});

}  // namespace rds
