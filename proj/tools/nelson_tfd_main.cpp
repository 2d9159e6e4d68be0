#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nelson_tfd/fields.hpp"
#include "nelson_tfd/io.hpp"
#include "nelson_tfd/run.hpp"

namespace {

struct CliOverrides {
  std::string config_file;
  std::optional<double> beta;
  std::optional<double> beta_bar;
  std::optional<std::int64_t> paths;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<std::string> init;
  std::optional<std::string> group;
  std::optional<int> dump_paths;
  std::optional<int> dump_stride;
  std::optional<int> record_stride;
  std::optional<int> bins;
  std::optional<double> range_sd;
  std::optional<std::string> coordinate;
  std::optional<std::string> slice;
  std::optional<std::string> sweep;
  std::optional<double> grid_extent;
  std::optional<double> grid_spacing;
  std::optional<double> x0;
  std::optional<double> xt0;
  std::optional<double> burn_in;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_file, "key=value configuration file");
  cmd->add_option("--beta", o.beta, "inverse temperature (inf = zero temperature)");
  cmd->add_option("--beta-bar", o.beta_bar, "dimensionless hbar*omega*beta (wins over --beta)");
  cmd->add_option("--paths", o.paths, "number of sample paths");
  cmd->add_option("--dt", o.dt, "time step");
  cmd->add_option("--horizon", o.horizon, "simulated time span");
  cmd->add_option("--seed", o.seed, "base seed (64-bit)");
  cmd->add_option("--threads", o.threads, "worker threads (0 = auto; env NELSON_TFD_THREADS)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--init", o.init, "initialization: stationary|point|burn-in");
  cmd->add_option("--group", o.group, "equation group: forward|backward");
  cmd->add_option("--dump-paths", o.dump_paths, "paths written to paths.csv / pooled estimators");
  cmd->add_option("--dump-stride", o.dump_stride, "sample stride of dumped paths");
  cmd->add_option("--record-stride", o.record_stride, "moment-record stride in steps");
  cmd->add_option("--x0", o.x0, "initial x for point/burn-in init");
  cmd->add_option("--xt0", o.xt0, "initial x_tilde for point/burn-in init");
  cmd->add_option("--burn-in", o.burn_in, "burn-in time before recording");
}

ntfd::OptionMap merge_options(const CliOverrides& o) {
  ntfd::OptionMap options;
  if (!o.config_file.empty()) options = ntfd::load_config_file(o.config_file);
  auto set_num = [&](const char* key, const auto& opt) {
    if (opt) options[key] = ntfd::io::format_number(static_cast<double>(*opt));
  };
  auto set_int = [&](const char* key, const auto& opt) {
    if (opt) options[key] = std::to_string(*opt);
  };
  auto set_str = [&](const char* key, const std::optional<std::string>& opt) {
    if (opt) options[key] = *opt;
  };
  set_num("beta", o.beta);
  set_num("beta_bar", o.beta_bar);
  set_int("paths", o.paths);
  set_num("dt", o.dt);
  set_num("horizon", o.horizon);
  set_int("seed", o.seed);
  set_int("threads", o.threads);
  set_str("out", o.out);
  set_str("init", o.init);
  set_str("group", o.group);
  set_int("dump_paths", o.dump_paths);
  set_int("dump_stride", o.dump_stride);
  set_int("record_stride", o.record_stride);
  set_int("bins", o.bins);
  set_num("range_sd", o.range_sd);
  set_str("coordinate", o.coordinate);
  set_str("slice", o.slice);
  set_str("sweep", o.sweep);
  set_num("grid_extent", o.grid_extent);
  set_num("grid_spacing", o.grid_spacing);
  set_num("x0", o.x0);
  set_num("xt0", o.xt0);
  set_num("burn_in", o.burn_in);
  return options;
}

int dispatch(const CliOverrides& overrides, int (*command)(const ntfd::RunConfig&)) {
  try {
    std::vector<std::string> warnings;
    const ntfd::RunConfig config = ntfd::resolve_config(merge_options(overrides), &warnings);
    for (const std::string& warning : warnings) std::cerr << "warning: " << warning << "\n";
    return command(config);
  } catch (const ntfd::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return ntfd::kExitConfig;
  } catch (const std::invalid_argument& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return ntfd::kExitConfig;
  } catch (const ntfd::PathDivergedError& err) {
    std::cerr << "numerical divergence: " << err.what() << "\n";
    return ntfd::kExitDiverged;
  } catch (const ntfd::GridConvergenceError& err) {
    std::cerr << "grid convergence failure: " << err.what() << "\n";
    return ntfd::kExitConvergence;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-temperature Nelson stochastic mechanics simulator"};
  app.require_subcommand(1);

  CliOverrides simulate_opts, histogram_opts, uncertainty_opts, residuals_opts;

  CLI::App* simulate = app.add_subcommand("simulate", "sample paths and moment time series");
  add_common_options(simulate, simulate_opts);

  CLI::App* histogram = app.add_subcommand("histogram", "marginal histogram with analytic overlay");
  add_common_options(histogram, histogram_opts);
  histogram->add_option("--bins", histogram_opts.bins, "number of bins (>= 2)");
  histogram->add_option("--range-sd", histogram_opts.range_sd, "half-range in units of sd");
  histogram->add_option("--coordinate", histogram_opts.coordinate, "x|x_tilde");
  histogram->add_option("--slice", histogram_opts.slice, "final|pooled");

  CLI::App* uncertainty = app.add_subcommand("uncertainty", "uncertainty product over a beta_bar sweep");
  add_common_options(uncertainty, uncertainty_opts);
  uncertainty->add_option("--sweep", uncertainty_opts.sweep,
                          "comma-separated beta_bar values (inf allowed)");

  CLI::App* residuals = app.add_subcommand("residuals", "field-equation residual report");
  add_common_options(residuals, residuals_opts);
  residuals->add_option("--grid-extent", residuals_opts.grid_extent, "residual grid half-width L");
  residuals->add_option("--grid-spacing", residuals_opts.grid_spacing, "residual grid spacing h");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);  // --help
    app.exit(err);
    return ntfd::kExitConfig;
  }

  if (simulate->parsed()) return dispatch(simulate_opts, ntfd::cmd_simulate);
  if (histogram->parsed()) return dispatch(histogram_opts, ntfd::cmd_histogram);
  if (uncertainty->parsed()) return dispatch(uncertainty_opts, ntfd::cmd_uncertainty);
  if (residuals->parsed()) return dispatch(residuals_opts, ntfd::cmd_residuals);
  return ntfd::kExitConfig;
}
