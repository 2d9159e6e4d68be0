#include "nelson_tfd/analytic.hpp"

#include <cmath>

namespace ntfd {

EquilibriumSolution::EquilibriumSolution(const PhysicalParams& params)
    : params_(params),
      coth_half_(coth_half_beta_bar(params)),
      csch_half_(csch_half_beta_bar(params)) {
  params_.validate();
}

double EquilibriumSolution::r_eq(double x, double x_tilde) const {
  // At beta = inf the helpers give coth = 1, csch = 0, which is the
  // decoupled ground-state form -(mw/2hbar)(x^2 + x~^2).
  const double scale = params_.m * params_.omega / params_.hbar;
  return -0.5 * scale * (coth_half_ * (x * x + x_tilde * x_tilde) - 2.0 * csch_half_ * x * x_tilde);
}

double EquilibriumSolution::r_eq_dx(double x, double x_tilde) const {
  const double scale = params_.m * params_.omega / params_.hbar;
  return -scale * (coth_half_ * x - csch_half_ * x_tilde);
}

double EquilibriumSolution::r_eq_dxt(double x, double x_tilde) const {
  const double scale = params_.m * params_.omega / params_.hbar;
  return -scale * (coth_half_ * x_tilde - csch_half_ * x);
}

double EquilibriumSolution::r_eq_dxx() const {
  return -params_.m * params_.omega / params_.hbar * coth_half_;
}

double EquilibriumSolution::r_eq_dxtxt() const { return r_eq_dxx(); }

double EquilibriumSolution::r_eq_dxxt() const {
  return params_.m * params_.omega / params_.hbar * csch_half_;
}

DriftValues EquilibriumSolution::drift_eq(double x, double x_tilde) const {
  const double w = params_.omega;
  const double b = -w * (coth_half_ * x - csch_half_ * x_tilde);
  const double b_tilde_star = w * (coth_half_ * x_tilde - csch_half_ * x);
  return {b, -b, -b_tilde_star, b_tilde_star};
}

DriftSet EquilibriumSolution::drift_set() const {
  const double w = params_.omega;
  const double c = coth_half_;
  const double s = csch_half_;
  DriftSet drifts;
  drifts.b = [w, c, s](double x, double xt, double) { return -w * (c * x - s * xt); };
  drifts.b_star = [w, c, s](double x, double xt, double) { return w * (c * x - s * xt); };
  drifts.b_tilde = [w, c, s](double x, double xt, double) { return -w * (c * xt - s * x); };
  drifts.b_tilde_star = [w, c, s](double x, double xt, double) { return w * (c * xt - s * x); };
  drifts.db_dx = [w, c](double, double, double) { return -w * c; };
  drifts.db_star_dx = [w, c](double, double, double) { return w * c; };
  drifts.db_tilde_dxt = [w, c](double, double, double) { return -w * c; };
  drifts.db_tilde_star_dxt = [w, c](double, double, double) { return w * c; };
  return drifts;
}

StationaryCovariance EquilibriumSolution::stationary_covariance() const {
  const double unit = 0.5 * params_.hbar / (params_.m * params_.omega);
  return {unit * coth_half_, unit * coth_half_, unit * csch_half_};
}

double EquilibriumSolution::momentum_half_diff_variance() const {
  return 0.5 * params_.m * params_.hbar * params_.omega * coth_half_;
}

double EquilibriumSolution::uncertainty_product() const {
  return 0.5 * params_.hbar * coth_half_;
}

}  // namespace ntfd
