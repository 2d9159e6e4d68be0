#pragma once

#include <functional>

#include "nelson_tfd/params.hpp"

namespace ntfd {

/// The four drift values at one phase-space point.
struct DriftValues {
  double b = 0.0;             ///< non-tilde, forward
  double b_star = 0.0;        ///< non-tilde, backward
  double b_tilde = 0.0;       ///< tilde, forward
  double b_tilde_star = 0.0;  ///< tilde, backward
};

/// The four drift fields as evaluable functions of (x, x~, t).
///
/// For drift sets derived from scalar fields (R, S):
///   b  = (hbar/m) d(R+S)/dx,    b*  = -(hbar/m) d(R-S)/dx,
///   b~ = (hbar/m) d~(R-S),      b~* = -(hbar/m) d~(R+S).
/// Under that construction b~ - b~* = (hbar/m) d~ ln(e^{2R}), i.e. b~ is the
/// time-reversed (forward-marchable) drift of the tilde coordinate's
/// backward-form equation, and b - b* = 2u, b + b* = 2v.
struct DriftSet {
  using Field = std::function<double(double x, double x_tilde, double t)>;

  Field b;
  Field b_star;
  Field b_tilde;
  Field b_tilde_star;

  // Optional analytic partials used by the closed-form residual evaluators;
  // when absent they fall back to tight central differences.
  Field db_dx;                 ///< d b / dx
  Field db_star_dx;            ///< d b* / dx
  Field db_tilde_dxt;          ///< d b~ / dx~
  Field db_tilde_star_dxt;     ///< d b~* / dx~

  DriftValues eval(double x, double x_tilde, double t) const {
    return {b(x, x_tilde, t), b_star(x, x_tilde, t), b_tilde(x, x_tilde, t),
            b_tilde_star(x, x_tilde, t)};
  }

  bool has_analytic_partials() const {
    return static_cast<bool>(db_dx) && static_cast<bool>(db_star_dx) &&
           static_cast<bool>(db_tilde_dxt) && static_cast<bool>(db_tilde_star_dxt);
  }
};

}  // namespace ntfd
