#pragma once

#include "nelson_tfd/drift.hpp"
#include "nelson_tfd/params.hpp"

namespace ntfd {

/// Stationary second moments of the doubled-oscillator equilibrium density
/// e^{2 R_eq}: Var[x] = Var[x~] = (hbar/2mw) coth(beta_bar/2) and the cross
/// moment E[x x~] = (hbar/2mw) / sinh(beta_bar/2).
struct StationaryCovariance {
  double var_x = 0.0;
  double var_x_tilde = 0.0;
  double cov_xxt = 0.0;
};

/// Closed-form thermal-equilibrium solution for the harmonic oscillator.
///
/// The wavefunction is e^{R_eq} with
///   R_eq = -(mw/hbar) [(x^2 + x~^2) cosh(bb/2) - 2 x x~] / (2 sinh(bb/2))
/// and S_eq = 0. All members are pure functions of immutable parameters.
class EquilibriumSolution {
 public:
  explicit EquilibriumSolution(const PhysicalParams& params);

  const PhysicalParams& params() const { return params_; }

  double r_eq(double x, double x_tilde) const;
  double s_eq(double x, double x_tilde) const { (void)x; (void)x_tilde; return 0.0; }

  // Exact partial derivatives of R_eq (the quadratic form has constant
  // second derivatives and no higher ones).
  double r_eq_dx(double x, double x_tilde) const;
  double r_eq_dxt(double x, double x_tilde) const;
  double r_eq_dxx() const;
  double r_eq_dxtxt() const;
  double r_eq_dxxt() const;

  /// The four equilibrium drifts. With S_eq = 0: b* = -b and b~ = -b~*,
  /// b = -w (x coth(bb/2) - x~ / sinh(bb/2)),
  /// b~* = +w (x~ coth(bb/2) - x / sinh(bb/2)).
  DriftValues drift_eq(double x, double x_tilde) const;

  /// DriftSet view of drift_eq with analytic partials attached.
  DriftSet drift_set() const;

  StationaryCovariance stationary_covariance() const;

  /// Var[(p - p*)/2] = (m hbar w / 2) coth(bb/2), with p = m b, p* = m b*.
  double momentum_half_diff_variance() const;

  /// sqrt(Var[x]) sqrt(Var[(p-p*)/2]) = hbar/2 + hbar n.
  double uncertainty_product() const;

  double coth_half() const { return coth_half_; }
  double csch_half() const { return csch_half_; }

 private:
  PhysicalParams params_;
  double coth_half_;  // coth(beta_bar/2)
  double csch_half_;  // 1/sinh(beta_bar/2)
};

}  // namespace ntfd
