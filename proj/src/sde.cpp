#include "nelson_tfd/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <thread>

namespace ntfd {

namespace {

constexpr std::int64_t kBlockSize = 1024;

inline void check_finite(double x, double x_tilde, double guard, std::int64_t path,
                         std::int64_t step) {
  if (!(std::abs(x) <= guard) || !(std::abs(x_tilde) <= guard)) {
    throw PathDivergedError(path, step);
  }
}

// Equilibrium drifts with precomputed coefficients; the hot path of every
// thermal run. Marching up uses (b, b~), marching down uses (b*, b~*); in
// equilibrium both reduce to the same stable linear map.
struct ThermalGroupStepper {
  PhysicalParams params;
  double coth = 1.0, csch = 0.0;
  double noise = 0.0;      // sqrt(hbar/m), per sqrt(dt)
  double time_sign = 1.0;  // +1 forward group, -1 backward group
  double sd_x = 0.0, chol_21 = 0.0, chol_22 = 0.0;  // stationary sampler

  ThermalGroupStepper(const PhysicalParams& p, GroupMode group) : params(p) {
    const EquilibriumSolution eq(p);
    coth = eq.coth_half();
    csch = eq.csch_half();
    noise = std::sqrt(p.hbar / p.m);
    time_sign = group == GroupMode::Forward ? 1.0 : -1.0;
    const StationaryCovariance cov = eq.stationary_covariance();
    sd_x = std::sqrt(cov.var_x);
    chol_21 = cov.cov_xxt / sd_x;
    chol_22 = std::sqrt(cov.var_x - cov.cov_xxt * cov.cov_xxt / cov.var_x);
  }

  ThermalPoint sample_initial(NoiseStream& stream) const {
    const double z1 = stream.gaussian();
    const double z2 = stream.gaussian();
    return {sd_x * z1, chol_21 * z1 + chol_22 * z2, 0.0};
  }

  ThermalPoint step(const ThermalPoint& p, double dt, PathRng& rng) const {
    const double w = params.omega;
    // forward group: drift pair (b, b~); backward group: -(b*, b~*). Both
    // evaluate to the same expression for the equilibrium solution.
    const double drift_x = -w * (coth * p.x - csch * p.x_tilde);
    const double drift_xt = -w * (coth * p.x_tilde - csch * p.x);
    const double sq = noise * std::sqrt(dt);
    return {p.x + drift_x * dt + sq * rng.non_tilde.gaussian(),
            p.x_tilde + drift_xt * dt + sq * rng.tilde.gaussian(), p.t + time_sign * dt};
  }

  double half_momentum_diff(const ThermalPoint& p) const {
    return -params.m * params.omega * (coth * p.x - csch * p.x_tilde);
  }
};

// Caller-supplied drift fields (std::function indirection).
struct FunctionGroupStepper {
  PhysicalParams params;
  const DriftSet* drifts;
  GroupMode group;
  double noise;
  ThermalGroupStepper sampler;  // stationary init reuses the equilibrium law

  FunctionGroupStepper(const PhysicalParams& p, const DriftSet& d, GroupMode g)
      : params(p), drifts(&d), group(g), noise(std::sqrt(p.hbar / p.m)), sampler(p, g) {}

  ThermalPoint sample_initial(NoiseStream& stream) const { return sampler.sample_initial(stream); }

  ThermalPoint step(const ThermalPoint& p, double dt, PathRng& rng) const {
    const double sq = noise * std::sqrt(dt);
    double drift_x, drift_xt, sign;
    if (group == GroupMode::Forward) {
      drift_x = drifts->b(p.x, p.x_tilde, p.t);
      drift_xt = drifts->b_tilde(p.x, p.x_tilde, p.t);
      sign = 1.0;
    } else {
      drift_x = -drifts->b_star(p.x, p.x_tilde, p.t);
      drift_xt = -drifts->b_tilde_star(p.x, p.x_tilde, p.t);
      sign = -1.0;
    }
    return {p.x + drift_x * dt + sq * rng.non_tilde.gaussian(),
            p.x_tilde + drift_xt * dt + sq * rng.tilde.gaussian(), p.t + sign * dt};
  }

  double half_momentum_diff(const ThermalPoint& p) const {
    return 0.5 * params.m *
           (drifts->b(p.x, p.x_tilde, p.t) - drifts->b_star(p.x, p.x_tilde, p.t));
  }
};

// Transformed OU pair; X stored in .x, X~ in .x_tilde.
struct TransformedStepper {
  PhysicalParams params;
  double c_keep = 0.0;   // sqrt(hbar(1+n)/m)
  double c_cross = 0.0;  // sqrt(hbar n/m)
  double sd = 0.0;       // stationary OU sd, sqrt((hbar/2mw)(1+2n))

  explicit TransformedStepper(const PhysicalParams& p) : params(p) {
    const double n = thermal_occupation(p);
    c_keep = std::sqrt(p.hbar * (1.0 + n) / p.m);
    c_cross = std::sqrt(p.hbar * n / p.m);
    sd = std::sqrt(0.5 * p.hbar / (p.m * p.omega) * (1.0 + 2.0 * n));
  }

  ThermalPoint sample_initial(NoiseStream& stream) const {
    return {sd * stream.gaussian(), sd * stream.gaussian(), 0.0};
  }

  ThermalPoint step(const ThermalPoint& p, double dt, PathRng& rng) const {
    const double sq = std::sqrt(dt);
    const double dw = sq * rng.non_tilde.gaussian();
    const double dwt = sq * rng.tilde.gaussian();
    const double w = params.omega;
    return {p.x - w * p.x * dt + c_keep * dw - c_cross * dwt,
            p.x_tilde - w * p.x_tilde * dt + c_keep * dwt - c_cross * dw, p.t + dt};
  }

  double half_momentum_diff(const ThermalPoint&) const { return 0.0; }
};

struct RecordPlan {
  std::vector<std::int64_t> steps;  // strictly increasing, first = 0, last = n_steps

  static RecordPlan make(std::int64_t n_steps, int stride_in) {
    RecordPlan plan;
    const std::int64_t stride =
        stride_in > 0 ? stride_in : std::max<std::int64_t>(1, n_steps / 200);
    for (std::int64_t k = 0; k <= n_steps; k += stride) plan.steps.push_back(k);
    if (plan.steps.back() != n_steps) plan.steps.push_back(n_steps);
    return plan;
  }
};

template <class Stepper>
void run_block(const EnsembleConfig& config, const Stepper& stepper, std::int64_t first,
               std::int64_t last, const RecordPlan& plan, std::vector<MomentRecord>& partial,
               Ensemble& out) {
  const std::int64_t n_steps = config.n_steps();
  const double guard = 1e6 * config.params.length_scale();
  const std::int64_t burn_steps =
      config.init == InitMode::BurnIn
          ? static_cast<std::int64_t>(config.burn_in / config.dt + 1e-9)
          : 0;

  for (std::int64_t path = first; path < last; ++path) {
    PathRng rng(config.base_seed, static_cast<std::uint32_t>(path));
    ThermalPoint point;
    if (config.init == InitMode::StationaryExact) {
      point = stepper.sample_initial(rng.init);
    } else {
      point = {config.x0, config.xt0, 0.0};
    }
    for (std::int64_t k = 0; k < burn_steps; ++k) {
      point = stepper.step(point, config.dt, rng);
      check_finite(point.x, point.x_tilde, guard, path, k - burn_steps);
    }
    point.t = config.group == GroupMode::Backward ? config.horizon : 0.0;

    const bool dump = path < config.dump_paths;
    Path* dumped = dump ? &out.dumped[path] : nullptr;
    PathSums& sums = out.path_sums[path];
    std::size_t next_record = 0;

    for (std::int64_t k = 0; k <= n_steps; ++k) {
      if (next_record < plan.steps.size() && plan.steps[next_record] == k) {
        MomentRecord& rec = partial[next_record];
        const double x = point.x, xt = point.x_tilde;
        rec.n += 1;
        rec.sx += x;
        rec.sxt += xt;
        rec.sxx += x * x;
        rec.sxtxt += xt * xt;
        rec.sxxt += x * xt;
        rec.sx3 += x * x * x;
        rec.sxt3 += xt * xt * xt;
        rec.sx4 += x * x * x * x;
        rec.sxt4 += xt * xt * xt * xt;
        rec.sx2xt2 += x * x * xt * xt;
        ++next_record;
      }
      {
        const double x = point.x, xt = point.x_tilde;
        const double w = stepper.half_momentum_diff(point);
        sums.n += 1;
        sums.sx += x;
        sums.sxt += xt;
        sums.sxx += x * x;
        sums.sxtxt += xt * xt;
        sums.sxxt += x * xt;
        sums.sw += w;
        sums.sww += w * w;
      }
      if (dump && k % config.dump_stride == 0) dumped->samples.push_back(point);
      if (k < n_steps) {
        point = stepper.step(point, config.dt, rng);
        check_finite(point.x, point.x_tilde, guard, path, k);
      }
    }
    out.final_points[path] = point;
    if (dump && config.group == GroupMode::Backward) {
      std::reverse(dumped->samples.begin(), dumped->samples.end());
    }
  }
}

template <class Stepper>
Ensemble run_ensemble(const EnsembleConfig& config, const Stepper& stepper) {
  config.validate();
  const std::int64_t n_paths = config.n_paths;
  const RecordPlan plan = RecordPlan::make(config.n_steps(), config.record_stride);

  Ensemble out;
  out.config = config;
  out.final_points.resize(n_paths);
  out.path_sums.resize(n_paths);
  out.dumped.resize(std::min<std::int64_t>(config.dump_paths, n_paths));
  for (std::size_t i = 0; i < out.dumped.size(); ++i) out.dumped[i].index = static_cast<std::int64_t>(i);

  const std::int64_t n_blocks = (n_paths + kBlockSize - 1) / kBlockSize;
  std::vector<std::vector<MomentRecord>> partials(n_blocks,
                                                  std::vector<MomentRecord>(plan.steps.size()));
  for (auto& partial : partials) {
    for (std::size_t r = 0; r < plan.steps.size(); ++r) {
      const double step_time = static_cast<double>(plan.steps[r]) * config.dt;
      partial[r].t =
          config.group == GroupMode::Backward ? config.horizon - step_time : step_time;
    }
  }

  int n_threads = config.threads > 0 ? config.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = static_cast<int>(std::min<std::int64_t>(n_threads, n_blocks));

  std::atomic<std::int64_t> next_block{0};
  std::mutex error_mutex;
  std::optional<PathDivergedError> first_error;

  auto worker = [&] {
    while (true) {
      const std::int64_t block = next_block.fetch_add(1);
      if (block >= n_blocks) break;
      const std::int64_t first = block * kBlockSize;
      const std::int64_t last = std::min(first + kBlockSize, n_paths);
      try {
        run_block(config, stepper, first, last, plan, partials[block], out);
      } catch (const PathDivergedError& err) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error || err.path_index < first_error->path_index) first_error = err;
      }
    }
  };

  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
  }
  if (first_error) throw *first_error;

  // Deterministic reduction in block order regardless of thread schedule.
  out.records = std::move(partials[0]);
  for (std::int64_t block = 1; block < n_blocks; ++block) merge_records(out.records, partials[block]);
  if (config.group == GroupMode::Backward) {
    std::reverse(out.records.begin(), out.records.end());
  }
  return out;
}

}  // namespace

void EnsembleConfig::validate() const {
  params.validate();
  if (n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (horizon < 0.0) throw std::invalid_argument("horizon must be >= 0");
  if (dump_paths < 0) throw std::invalid_argument("dump_paths must be >= 0");
  if (dump_stride < 1) throw std::invalid_argument("dump_stride must be >= 1");
  if (init == InitMode::BurnIn && burn_in < 0.0) throw std::invalid_argument("burn_in must be >= 0");
}

ThermalPoint step_forward_group(const ThermalPoint& point, double dt, const DriftSet& drifts,
                                const PhysicalParams& params, PathRng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  FunctionGroupStepper stepper(params, drifts, GroupMode::Forward);
  ThermalPoint next = stepper.step(point, dt, rng);
  check_finite(next.x, next.x_tilde, 1e6 * params.length_scale(), -1, -1);
  return next;
}

ThermalPoint step_backward_group(const ThermalPoint& point, double dt, const DriftSet& drifts,
                                 const PhysicalParams& params, PathRng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  FunctionGroupStepper stepper(params, drifts, GroupMode::Backward);
  ThermalPoint next = stepper.step(point, dt, rng);
  check_finite(next.x, next.x_tilde, 1e6 * params.length_scale(), -1, -1);
  return next;
}

TransformedPoint transform_coordinates(const ThermalPoint& point, const PhysicalParams& params) {
  const double n = thermal_occupation(params);
  const double a = std::sqrt(1.0 + n);
  const double b = std::sqrt(n);
  return {a * point.x - b * point.x_tilde, a * point.x_tilde - b * point.x};
}

ThermalPoint inverse_transform(const TransformedPoint& point, const PhysicalParams& params,
                               double t) {
  const double n = thermal_occupation(params);
  const double a = std::sqrt(1.0 + n);
  const double b = std::sqrt(n);
  return {a * point.X + b * point.X_tilde, a * point.X_tilde + b * point.X, t};
}

TransformedPoint step_transformed(const TransformedPoint& point, double dt,
                                  const PhysicalParams& params, PathRng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  TransformedStepper stepper(params);
  const ThermalPoint next = stepper.step({point.X, point.X_tilde, 0.0}, dt, rng);
  check_finite(next.x, next.x_tilde, 1e6 * params.length_scale(), -1, -1);
  return {next.x, next.x_tilde};
}

ThermalPoint sample_stationary(const PhysicalParams& params, NoiseStream& stream) {
  return ThermalGroupStepper(params, GroupMode::Forward).sample_initial(stream);
}

Ensemble simulate_ensemble(const EnsembleConfig& config) {
  return run_ensemble(config, ThermalGroupStepper(config.params, config.group));
}

Ensemble simulate_ensemble_with(const EnsembleConfig& config, const DriftSet& drifts) {
  return run_ensemble(config, FunctionGroupStepper(config.params, drifts, config.group));
}

Ensemble simulate_transformed_ensemble(const EnsembleConfig& config) {
  if (config.group != GroupMode::Forward) {
    throw std::invalid_argument("transformed ensemble marches forward only");
  }
  return run_ensemble(config, TransformedStepper(config.params));
}

void merge_records(std::vector<MomentRecord>& into, const std::vector<MomentRecord>& from) {
  if (into.size() != from.size()) throw std::invalid_argument("record grids differ");
  for (std::size_t i = 0; i < into.size(); ++i) {
    MomentRecord& a = into[i];
    const MomentRecord& b = from[i];
    a.n += b.n;
    a.sx += b.sx;
    a.sxt += b.sxt;
    a.sxx += b.sxx;
    a.sxtxt += b.sxtxt;
    a.sxxt += b.sxxt;
    a.sx3 += b.sx3;
    a.sxt3 += b.sxt3;
    a.sx4 += b.sx4;
    a.sxt4 += b.sxt4;
    a.sx2xt2 += b.sx2xt2;
  }
}

}  // namespace ntfd
