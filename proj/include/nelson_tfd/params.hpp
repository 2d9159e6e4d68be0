#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ntfd {

/// Physical parameters of the doubled harmonic oscillator.
///
/// All thermal formulas depend on the dimensionless group
/// beta_bar = hbar*omega*beta. beta = +infinity is a first-class value
/// marking zero temperature.
struct PhysicalParams {
  double m = 1.0;      ///< mass
  double omega = 1.0;  ///< angular frequency
  double hbar = 1.0;   ///< action quantum
  double beta = std::numeric_limits<double>::infinity();  ///< inverse temperature

  PhysicalParams() = default;
  PhysicalParams(double m_, double omega_, double hbar_, double beta_)
      : m(m_), omega(omega_), hbar(hbar_), beta(beta_) {
    validate();
  }

  /// Convenience constructor pinning the dimensionless temperature directly.
  static PhysicalParams from_beta_bar(double beta_bar, double m = 1.0,
                                      double omega = 1.0, double hbar = 1.0) {
    return PhysicalParams(m, omega, hbar, beta_bar / (hbar * omega));
  }

  void validate() const {
    if (!(m > 0.0) || std::isinf(m)) throw std::invalid_argument("m must be positive and finite");
    if (!(omega > 0.0) || std::isinf(omega)) throw std::invalid_argument("omega must be positive and finite");
    if (!(hbar > 0.0) || std::isinf(hbar)) throw std::invalid_argument("hbar must be positive and finite");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive (+infinity = zero temperature)");
  }

  double beta_bar() const { return hbar * omega * beta; }
  bool zero_temperature() const { return std::isinf(beta); }

  /// Natural length sqrt(hbar / (m omega)); the X = x/length_scale axis of
  /// the nondimensional plots.
  double length_scale() const { return std::sqrt(hbar / (m * omega)); }
};

/// One sample of the doubled configuration (x, x~) at time t.
struct ThermalPoint {
  double x = 0.0;
  double x_tilde = 0.0;
  double t = 0.0;

  bool finite() const {
    return std::isfinite(x) && std::isfinite(x_tilde) && std::isfinite(t);
  }
};

/// Bose occupation n = 1/(e^{beta_bar} - 1); 0 at zero temperature.
double thermal_occupation(const PhysicalParams& params);

/// Z(beta) = 1/(2 sinh(beta_bar/2)). Throws std::domain_error at beta = inf.
double partition_function(const PhysicalParams& params);

/// coth(beta_bar/2) = 1 + 2n, evaluated without overflow for any beta_bar.
/// Equals 1 at zero temperature.
double coth_half_beta_bar(const PhysicalParams& params);

/// 1/sinh(beta_bar/2) = 2 sqrt(n(1+n)); 0 at zero temperature.
double csch_half_beta_bar(const PhysicalParams& params);

/// (X, X~) = sqrt(m omega / hbar) (x, x~).
struct DimensionlessPoint {
  double X = 0.0;
  double X_tilde = 0.0;
};
DimensionlessPoint nondimensionalize(const ThermalPoint& point, const PhysicalParams& params);

}  // namespace ntfd
