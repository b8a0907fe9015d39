// rdslab: command-line driver for the experiment registry.
#include "rds/experiments.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed_base;
  std::optional<int> seeds;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool dump_flow = false;
  std::optional<std::string> system;
  std::optional<double> lambda;
  std::optional<double> T;
  std::optional<double> block;
  std::optional<double> dt;
  std::optional<double> U;
  std::optional<std::string> side;
  std::optional<double> rho;
  std::optional<int> samples;
  std::optional<int> N;
  std::optional<std::string> kind;
  std::optional<int> levels;
  std::vector<std::string> report;
};

void add_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--seed-base", o.seed_base, "first seed");
  cmd->add_option("--seeds", o.seeds, "number of seeds");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--threads", o.threads, "worker threads");
  cmd->add_flag("--dump-flow", o.dump_flow, "write per-seed flow and path CSVs (simulate)");
  cmd->add_option("--system", o.system, "builtin system id");
  cmd->add_option("--lambda", o.lambda, "lambda parameter of the ou system");
  cmd->add_option("--T", o.T, "time horizon");
  cmd->add_option("--block", o.block, "QR block length");
  cmd->add_option("--dt", o.dt, "grid step");
  cmd->add_option("--U", o.U, "truncation horizon of the stationary quadrature");
  cmd->add_option("--side", o.side, "stable | unstable");
  cmd->add_option("--rho", o.rho, "sampling radius");
  cmd->add_option("--samples", o.samples, "uniform samples in the ball");
  cmd->add_option("--N", o.N, "membership horizon");
  cmd->add_option("--experiment", o.kind, "anticipate variant: substitution | residual | ito | stratonovich");
  cmd->add_option("--levels", o.levels, "refinement levels");
  cmd->add_option("--report", o.report, "stationary reports: variance, residual")->delimiter(',');
}

rds::ExperimentConfig resolve(const std::string& name, const Overrides& o) {
  rds::ExperimentConfig cfg = o.config.empty() ? rds::ExperimentConfig{} : rds::load_config(o.config);
  if (o.seed_base) cfg.seed_base = *o.seed_base;
  if (o.seeds) cfg.seeds = *o.seeds;
  if (o.out) cfg.out = *o.out;
  if (o.threads) cfg.threads = *o.threads;
  if (o.dump_flow) cfg.dump_flow = true;
  if (o.system) {
    cfg.system = rds::SystemSpec{};
    cfg.system.id = *o.system;
  }
  if (o.lambda) cfg.system.params["lambda"] = *o.lambda;
  if (o.T) cfg.T = *o.T;
  if (o.block) cfg.block = *o.block;
  if (o.dt) cfg.dt = *o.dt;
  if (o.U) cfg.stationary_horizon = *o.U;
  if (o.side) {
    if (*o.side == "stable") cfg.manifold.side = rds::Side::Stable;
    else if (*o.side == "unstable") cfg.manifold.side = rds::Side::Unstable;
    else throw rds::ConfigError("side: expected 'stable' or 'unstable', got '" + *o.side + "'");
  }
  if (o.rho) cfg.manifold.rho = *o.rho;
  if (o.samples) cfg.manifold.samples = *o.samples;
  if (o.N) cfg.manifold.N = *o.N;
  if (o.kind) cfg.anticipate.experiment = *o.kind;
  if (o.levels) {
    if (name == "anticipate") cfg.anticipate.levels = *o.levels;
    else cfg.levels = *o.levels;
  }
  if (!o.report.empty()) cfg.report = o.report;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random dynamical systems lab: stationary trajectories, Lyapunov spectra, invariant manifolds"};
  app.require_subcommand(1);

  bool print_config = false;
  app.add_subcommand("list", "list experiments");
  std::vector<std::pair<std::string, CLI::App*>> commands;
  std::vector<Overrides> overrides(rds::list_experiments().size());
  std::size_t k = 0;
  for (const auto& e : rds::list_experiments()) {
    CLI::App* cmd = app.add_subcommand(e.id, e.description);
    add_options(cmd, overrides[k++]);
    cmd->add_flag("--print-config", print_config, "print the resolved config and exit");
    commands.emplace_back(e.id, cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rds::kExitConfig;
  }

  if (app.got_subcommand("list")) {
    for (const auto& e : rds::list_experiments()) std::cout << e.id << "\t" << e.description << "\n";
    return rds::kExitOk;
  }
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!commands[i].second->parsed()) continue;
    rds::ExperimentConfig cfg;
    try {
      cfg = resolve(commands[i].first, overrides[i]);
    } catch (const rds::Error& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return rds::kExitConfig;
    }
    if (print_config) {
      std::cout << rds::to_json(cfg).dump(2) << "\n";
      return rds::kExitOk;
    }
    return rds::run_experiment(cfg, commands[i].first, std::cerr);
  }
  return rds::kExitConfig;
}
