#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nelson_tfd/analytic.hpp"
#include "nelson_tfd/drift.hpp"
#include "nelson_tfd/params.hpp"
#include "nelson_tfd/rng.hpp"

namespace ntfd {

/// Thrown when a coordinate leaves the guard box |x| > 1e6 sqrt(hbar/mw)
/// or becomes non-finite.
class PathDivergedError : public std::runtime_error {
 public:
  PathDivergedError(std::int64_t path_index, std::int64_t step_index)
      : std::runtime_error("path diverged; reduce dt (path " + std::to_string(path_index) +
                           ", step " + std::to_string(step_index) + ")"),
        path_index(path_index),
        step_index(step_index) {}

  std::int64_t path_index;
  std::int64_t step_index;
};

/// One step of the forward group, t -> t+dt.
///
/// x obeys the forward equation and advances with drift b. The tilde
/// coordinate obeys a backward-form equation; marching it up in time with
/// fresh noise requires the time-reversed drift, which for drift sets
/// derived from scalar fields (R, S) is exactly b~ (see DriftSet). Both
/// coordinates receive independent sqrt(hbar/m) dW noise.
ThermalPoint step_forward_group(const ThermalPoint& point, double dt, const DriftSet& drifts,
                                const PhysicalParams& params, PathRng& rng);

/// One step of the backward group, t -> t-dt: the starred drifts (b*, b~*)
/// play the mirrored role, x' = x - b* dt + noise, x~' = x~ - b~* dt + noise.
ThermalPoint step_backward_group(const ThermalPoint& point, double dt, const DriftSet& drifts,
                                 const PhysicalParams& params, PathRng& rng);

/// Transformed coordinates X = sqrt(1+n) x - sqrt(n) x~ and its mirror.
struct TransformedPoint {
  double X = 0.0;
  double X_tilde = 0.0;
};
TransformedPoint transform_coordinates(const ThermalPoint& point, const PhysicalParams& params);
ThermalPoint inverse_transform(const TransformedPoint& point, const PhysicalParams& params,
                               double t = 0.0);

/// One step of the transformed-coordinate pair.
///
/// X is an Ornstein-Uhlenbeck process,
///   dX = -w X dt + sqrt(hbar(1+n)/m) dW - sqrt(hbar n/m) dW~,
/// with total noise variance (hbar/m)(1+2n) dt. X~ obeys the time-reversed
/// partner equation and is marched in its stable sense, sharing the same
/// two increments with swapped roles.
TransformedPoint step_transformed(const TransformedPoint& point, double dt,
                                  const PhysicalParams& params, PathRng& rng);

/// Exact draw from the stationary Gaussian e^{2 R_eq} (t = 0).
ThermalPoint sample_stationary(const PhysicalParams& params, NoiseStream& stream);

enum class InitMode { StationaryExact, Point, BurnIn };
enum class GroupMode { Forward, Backward };

struct EnsembleConfig {
  PhysicalParams params;
  std::int64_t n_paths = 100000;
  double dt = 1e-3;        ///< defaults to 1e-3/omega via defaults()
  double horizon = 10.0;   ///< defaults to 10/omega via defaults()
  std::uint64_t base_seed = 0;
  InitMode init = InitMode::StationaryExact;
  GroupMode group = GroupMode::Forward;
  double x0 = 0.0;         ///< initial point for InitMode::Point / BurnIn
  double xt0 = 0.0;
  double burn_in = 0.0;    ///< defaults to 10/omega via defaults() for BurnIn
  int dump_paths = 0;      ///< retain the first K paths in full
  int dump_stride = 1;     ///< keep every k-th sample of dumped paths
  int record_stride = 0;   ///< moment-record stride in steps; 0 = auto (~200 records)
  int threads = 0;         ///< 0 = hardware concurrency

  static EnsembleConfig defaults(const PhysicalParams& params) {
    EnsembleConfig config;
    config.params = params;
    config.dt = 1e-3 / params.omega;
    config.horizon = 10.0 / params.omega;
    config.burn_in = 10.0 / params.omega;
    return config;
  }

  void validate() const;
  std::int64_t n_steps() const { return static_cast<std::int64_t>(horizon / dt); }
};

/// A retained path: samples at uniform dt, reproducible from (seed, index).
struct Path {
  std::int64_t index = 0;
  std::vector<ThermalPoint> samples;
};

/// Across-path raw sums at one recorded time.
struct MomentRecord {
  double t = 0.0;
  std::int64_t n = 0;
  double sx = 0.0, sxt = 0.0;
  double sxx = 0.0, sxtxt = 0.0, sxxt = 0.0;
  double sx3 = 0.0, sxt3 = 0.0;
  double sx4 = 0.0, sxt4 = 0.0, sx2xt2 = 0.0;
};

/// Per-path pooled sums over all visited (post-burn-in) samples.
/// w = m (b - b*)/2 is the half-difference momentum evaluated on samples.
struct PathSums {
  std::int64_t n = 0;
  double sx = 0.0, sxt = 0.0;
  double sxx = 0.0, sxtxt = 0.0, sxxt = 0.0;
  double sw = 0.0, sww = 0.0;
};

struct Ensemble {
  EnsembleConfig config;
  std::vector<ThermalPoint> final_points;  ///< end-of-march slice, one per path
  std::vector<PathSums> path_sums;
  std::vector<MomentRecord> records;
  std::vector<Path> dumped;
};

/// Run the equilibrium-drift ensemble described by config. Deterministic
/// given base_seed, independent of the thread count.
Ensemble simulate_ensemble(const EnsembleConfig& config);

/// Same engine with caller-supplied drift fields.
Ensemble simulate_ensemble_with(const EnsembleConfig& config, const DriftSet& drifts);

/// Ensemble of the transformed OU coordinate pair (X stored in x, X~ in
/// x_tilde). InitMode::Point starts at (x0, xt0); StationaryExact draws from
/// the OU stationary law with Var = (hbar/2mw)(1+2n) per coordinate.
Ensemble simulate_transformed_ensemble(const EnsembleConfig& config);

/// Merge two ensembles produced by the same config over disjoint path
/// ranges (associative; used by tests and the parallel runner).
void merge_records(std::vector<MomentRecord>& into, const std::vector<MomentRecord>& from);

}  // namespace ntfd
