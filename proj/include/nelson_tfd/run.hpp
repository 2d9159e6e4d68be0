#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nelson_tfd/params.hpp"
#include "nelson_tfd/sde.hpp"
#include "nelson_tfd/stats.hpp"

namespace ntfd {

/// Invalid configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Exit-code contract (stable): 0 success, 2 config error, 3 numerical
// divergence, 4 grid-convergence failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitConvergence = 4;

/// Raw key=value options collected from a config file and CLI overrides
/// (override wins). Unknown keys are rejected at resolve time.
using OptionMap = std::map<std::string, std::string>;

OptionMap load_config_file(const std::string& path);

struct RunConfig {
  PhysicalParams params;
  std::int64_t n_paths = 100000;
  double dt = 0.0;       // resolved to 1e-3/omega when unset
  double horizon = 0.0;  // resolved to 10/omega when unset
  std::uint64_t seed = 0;
  int threads = 0;
  InitMode init = InitMode::StationaryExact;
  GroupMode group = GroupMode::Forward;
  double x0 = 0.0, xt0 = 0.0;
  double burn_in = 0.0;  // resolved to 10/omega when unset
  std::string out_dir = ".";
  int dump_paths = 1;
  int dump_stride = 1;
  int record_stride = 0;

  // histogram command
  int bins = 101;
  double range_sd = 5.0;
  Coordinate hist_coord = Coordinate::X;
  SampleSlice slice = SampleSlice::Final;

  // uncertainty command
  std::vector<double> sweep;  // beta_bar values; empty = just params' beta_bar

  // residuals command
  double grid_extent = 0.0;   // 0 = default 6 sqrt(Var[x])
  double grid_spacing = 0.0;  // 0 = default 0.005 sqrt(hbar/mw)

  /// Canonical serialized form (sorted keys); hashed into CSV metadata.
  std::string canonical() const;

  EnsembleConfig ensemble_config() const;
};

/// Build a RunConfig from merged options. Throws ConfigError on unknown
/// keys, missing/duplicate temperature, or invalid values. `warnings`
/// collects non-fatal notes (e.g. beta_bar overriding beta).
RunConfig resolve_config(const OptionMap& options, std::vector<std::string>* warnings = nullptr);

// Commands write their CSV outputs into config.out_dir and return an exit
// code from the contract above; failures print one line to stderr.
int cmd_simulate(const RunConfig& config);
int cmd_histogram(const RunConfig& config);
int cmd_uncertainty(const RunConfig& config);
int cmd_residuals(const RunConfig& config);

}  // namespace ntfd
