#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nelson_tfd/analytic.hpp"
#include "nelson_tfd/drift.hpp"
#include "nelson_tfd/params.hpp"
#include "nelson_tfd/sde.hpp"

namespace ntfd {

class GridConvergenceError : public std::runtime_error {
 public:
  explicit GridConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Uniform square grid on [-L, L]^2: node i maps to -L + i h, i = 0..n-1.
struct GridSpec {
  double extent = 0.0;   // L
  double spacing = 0.0;  // h
  int n = 0;

  static GridSpec make(double extent, double spacing);
  double coord(int i) const { return -extent + i * spacing; }
  bool operator==(const GridSpec& other) const {
    return extent == other.extent && spacing == other.spacing && n == other.n;
  }
};

/// Scalar field over (x, x~): either a closed-form evaluable (with optional
/// analytic partials) or uniform grid samples.
class ScalarField2D {
 public:
  using Fn = std::function<double(double, double)>;

  /// Optional analytic partial derivatives of a closed-form field.
  struct Derivatives {
    Fn dx, dxt;          // first order
    Fn dxx, dxtxt, dxxt;  // second order
  };

  static ScalarField2D closed_form(Fn value);
  static ScalarField2D closed_form(Fn value, Derivatives derivatives);
  static ScalarField2D grid(GridSpec spec, std::vector<double> values);  // row-major, x outer

  bool is_grid() const { return is_grid_; }
  const GridSpec& spec() const;
  double node(int i, int j) const;
  const std::vector<double>& values() const;

  /// Field value; grid fields interpolate bilinearly between nodes.
  double value(double x, double x_tilde) const;

  const Derivatives& derivatives() const { return derivatives_; }

  /// Sample a closed-form (or finer-grid) field onto a grid.
  ScalarField2D sampled(const GridSpec& spec) const;

 private:
  bool is_grid_ = false;
  Fn value_;
  Derivatives derivatives_;
  GridSpec spec_;
  std::vector<double> values_;
};

/// Plain-text grid exchange format: first line "L h", then n rows of n
/// space-separated values (row index = x node, column index = x~ node).
void save_grid_field(const std::string& path, const ScalarField2D& field);
ScalarField2D load_grid_field(const std::string& path);

/// Current and osmotic velocity components of the doubled system.
struct VelocityFields {
  ScalarField2D v;        // (hbar/m) dS/dx
  ScalarField2D v_tilde;  // -(hbar/m) dS/dx~
  ScalarField2D u;        // (hbar/m) dR/dx
  ScalarField2D u_tilde;  // (hbar/m) dR/dx~
};

/// Build the four velocity fields from (R, S).
///
/// Closed-form inputs keep closed-form outputs (analytic partials chained
/// where available); grid inputs are differentiated with second-order
/// stencils and checked for h-convergence (throws GridConvergenceError when
/// derivative estimates at h and 2h disagree by more than 10%).
VelocityFields velocities_from_rs(const ScalarField2D& r_field, const ScalarField2D& s_field,
                                  const PhysicalParams& params);

/// DriftSet assembled from (R, S) through the defining gradients.
DriftSet drift_set_from_rs(const ScalarField2D& r_field, const ScalarField2D& s_field,
                           const PhysicalParams& params);

/// Closed-form views of the equilibrium solution with exact partials.
ScalarField2D equilibrium_r_field(const EquilibriumSolution& eq);
ScalarField2D equilibrium_s_field();
/// Normalized density e^{2 R_eq} / (2 pi hbar / 2mw).
ScalarField2D equilibrium_density_field(const EquilibriumSolution& eq);

struct Potential1D {
  std::function<double(double)> value;
  std::function<double(double)> deriv;

  static Potential1D harmonic(const PhysicalParams& params);
  static Potential1D zero();
};

enum class DiffMethod {
  Auto,        ///< ClosedForm when every input is closed-form, else Stencil
  ClosedForm,  ///< per-factor derivatives (analytic or tight FD) + product rule
  Stencil      ///< second-order central stencils on node products
};

struct ResidualOptions {
  GridSpec grid;             ///< evaluation nodes; default from params
  int margin = 2;            ///< cells excluded from the norm at each edge
  DiffMethod method = DiffMethod::Auto;
  double fd_first = 0.0;     ///< FD step for first partial fallback; 0 = 1e-5 scale
  double fd_second = 0.0;    ///< FD step for second partial fallback; 0 = 1e-2 scale

  static ResidualOptions defaults(const PhysicalParams& params);
};

/// Default residual grid: L = 6 sqrt(Var[x]), h = 0.005 sqrt(hbar/mw).
GridSpec default_residual_grid(const PhysicalParams& params);

// Residual fields evaluate the stationary field equations on the interior
// nodes (margin excluded), row-major; the *_residual wrappers return the
// max-norm. All operators are linear detectors in their inputs.

/// u - (hbar/2m) d ln P / dx and the tilde partner.
std::vector<double> osmotic_residual_field(const VelocityFields& vel, const ScalarField2D& density,
                                           const PhysicalParams& params, const ResidualOptions& opts);
double osmotic_residual(const VelocityFields& vel, const ScalarField2D& density,
                        const PhysicalParams& params, const ResidualOptions& opts);

/// Induced dP/dt of the continuity equation: -d(vP)/dx - d~(v~P)/dx~.
std::vector<double> continuity_residual_field(const VelocityFields& vel,
                                              const ScalarField2D& density,
                                              const PhysicalParams& params,
                                              const ResidualOptions& opts);
double continuity_residual(const VelocityFields& vel, const ScalarField2D& density,
                           const PhysicalParams& params, const ResidualOptions& opts);

enum class FPDirection { Forward, Backward };

/// Induced dP/dt of the Fokker-Planck pair:
///   forward:  -d(b P)  - d~(b~* P) + (hbar/2m)(dxx - dxtxt) P
///   backward: -d(b* P) - d~(b~ P)  - (hbar/2m)(dxx - dxtxt) P
std::vector<double> fokker_planck_residual_field(const DriftSet& drifts,
                                                 const ScalarField2D& density,
                                                 const PhysicalParams& params, FPDirection direction,
                                                 const ResidualOptions& opts);
double fokker_planck_residual(const DriftSet& drifts, const ScalarField2D& density,
                              const PhysicalParams& params, FPDirection direction,
                              const ResidualOptions& opts);

/// Stationary kinematical equation: -(hbar/2m)(dxx - dxtxt) v - d(u v + u~ v~)/dx.
std::vector<double> kinematical_residual_field(const VelocityFields& vel,
                                               const PhysicalParams& params,
                                               const ResidualOptions& opts);
double kinematical_residual(const VelocityFields& vel, const PhysicalParams& params,
                            const ResidualOptions& opts);

/// Stationary dynamical (Nelson-Newton) equation:
///   (hbar/2m)(dxx - dxtxt) u + (u d - u~ d~) u - (v d + v~ d~) v - (1/m) dV(x)/dx.
std::vector<double> dynamical_residual_field(const VelocityFields& vel, const Potential1D& potential,
                                             const PhysicalParams& params,
                                             const ResidualOptions& opts);
double dynamical_residual(const VelocityFields& vel, const Potential1D& potential,
                          const PhysicalParams& params, const ResidualOptions& opts);

/// Twice-differentiable observable for the mean-derivative probe.
struct TestFunction2D {
  std::string name;
  std::function<double(double, double)> value;
  std::function<double(double, double)> dx, dxt, dxx, dxtxt;

  static TestFunction2D coordinate_x();
  static TestFunction2D x_squared();
  static TestFunction2D cross_xxt();
  static TestFunction2D xt_squared();
  static TestFunction2D constant(double c);
};

struct MeanDerivativeOptions {
  double cell_width = 0.0;     ///< 0 = 0.25 sqrt(Var[x])
  double extent_sd = 1.0;      ///< cells cover |x|,|x~| <= extent_sd * sd
  int min_cell_samples = 100;
};

struct MeanDerivativeReport {
  double empirical = 0.0;       ///< worst cell's empirical hybrid rate
  double analytic = 0.0;        ///< analytic mean derivative at that cell center
  double standard_error = 0.0;  ///< standard error of the empirical rate
  double worst_abs_error = 0.0;
  double cell_x = 0.0, cell_xt = 0.0;
  int cells_used = 0;
  std::int64_t samples_used = 0;
};

/// Compare the empirical hybrid mean derivative against its analytic form
///   b df/dx + b~* df/dx~ + (hbar/2m)(dxx - dxtxt) f
/// on cell-binned path increments. The empirical estimate at step k uses
/// [f(x_{k+1}, x~_k) - f(x_k, x~_{k-1})]/dt conditioned on (x_k, x~_k); the
/// x leg spans (t, t+dt) forward and the x~ leg spans (t-dt, t) backward,
/// matching the hybrid derivative's argument pattern. Requires an ensemble
/// with fully dumped forward-group paths (dump_stride == 1).
MeanDerivativeReport mean_derivative_check(const Ensemble& ensemble, const TestFunction2D& f,
                                           const DriftSet& drifts, const PhysicalParams& params,
                                           const MeanDerivativeOptions& opts = {});

}  // namespace ntfd
