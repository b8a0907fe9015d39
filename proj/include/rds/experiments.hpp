#pragma once

#include "rds/config.hpp"
#include "rds/stationary.hpp"
#include "rds/systems.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace rds {

struct ExperimentInfo {
  std::string id;
  std::string description;
};

/// Registered experiments in a fixed order.
const std::vector<ExperimentInfo>& list_experiments();

/// Exit statuses of run_experiment.
enum ExitStatus : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2 };

/// Runs one experiment and writes its artifacts under cfg.out. Identical
/// configs produce byte-identical artifacts. Config errors are detected
/// before anything is written. Diagnostics go to `log`.
int run_experiment(const ExperimentConfig& cfg, const std::string& name, std::ostream& log);

/// System described by a config.
SdeSystem build_system(const SystemSpec& spec);

/// Stationary trajectory of the configured system on `path`; throws
/// InvalidArgument for systems without a known construction.
StationaryTrajectory build_stationary(const ExperimentConfig& cfg, const SdeSystem& sys, const NoisePath& path);

/// Runs fn(i) for i in [0, n) on at most `threads` workers. The first
/// exception (lowest index) is rethrown after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace rds
