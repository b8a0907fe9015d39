#pragma once

#include "rds/manifolds.hpp"
#include "rds/stationary.hpp"
#include "rds/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rds {

inline constexpr int kConfigSchemaVersion = 1;

struct SystemSpec {
  std::string id = "hyperbolic2d";
  std::map<std::string, double> params;
  // Inline affine system dx = (A x + c) dt + G dW (Ito); used when id == "affine".
  Matrix A;
  Matrix G;
  Vector c;
};

struct ManifoldConfig {
  Side side = Side::Stable;
  double rho = 0.5;
  std::optional<double> beta;
  std::optional<double> eps;
  int N = 20;
  int samples = 200;   // uniform points in the ball
  int needles = 20;    // points per coordinate axis
  int bisection = 40;  // manifold-seeking points
  double invariance_t = 2.0;
  int pullback = 3;
};

struct AnticipateConfig {
  std::string experiment = "substitution";  // substitution | residual | ito | stratonovich
  int levels = 5;
  double T = 1.0;
  int trials = 100;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  SystemSpec system;
  std::uint64_t seed_base = 1;
  int seeds = 1;
  double dt = 0.01;
  double horizon = 0.0;     // two-sided path window; 0 = derive from the experiment
  double T = 10.0;
  double block = 1.0;
  double tau = 0.1;
  double gap = 0.1;
  Quadrature quadrature = Quadrature::EulerConsistent;
  double stationary_horizon = 40.0;
  std::vector<double> x0;   // initial point for `simulate`; zeros when empty
  ManifoldConfig manifold;
  AnticipateConfig anticipate;
  int levels = 3;           // refinement levels for `convergence`
  int threads = 1;
  std::string out = "out";
  bool dump_flow = false;
  std::vector<std::string> report{"variance", "residual"};
};

/// Canonical JSON with every real written as a hexadecimal float string.
nlohmann::json to_json(const ExperimentConfig& cfg);
/// Strict parse: unknown keys, wrong types and bad values raise ConfigError
/// naming the offending field. Reals may be numbers or hex-float strings.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Validates cross-field constraints (known system, grid-compatible times).
void validate_config(const ExperimentConfig& cfg);

/// Canonical JSON without `out` and `threads`, which do not affect results.
nlohmann::json result_json(const ExperimentConfig& cfg);

/// FNV-1a 64 of result_json, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string hex_double(double v);
double parse_double(const nlohmann::json& v, const std::string& field);

}  // namespace rds
