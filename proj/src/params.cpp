#include "nelson_tfd/params.hpp"

namespace ntfd {

// All thermal scalars are written in terms of e^{-beta_bar}, which stays in
// [0, 1) for every beta_bar > 0; sinh/cosh would overflow past ~1420.
// -expm1(-bb) = 1 - e^{-bb} keeps full precision for small beta_bar.

double thermal_occupation(const PhysicalParams& params) {
  if (params.zero_temperature()) return 0.0;
  const double bb = params.beta_bar();
  return std::exp(-bb) / (-std::expm1(-bb));
}

double partition_function(const PhysicalParams& params) {
  if (params.zero_temperature()) {
    throw std::domain_error("partition function undefined at beta=infinity in this normalization");
  }
  const double bb = params.beta_bar();
  return std::exp(-0.5 * bb) / (-std::expm1(-bb));
}

double coth_half_beta_bar(const PhysicalParams& params) {
  if (params.zero_temperature()) return 1.0;
  const double bb = params.beta_bar();
  return (1.0 + std::exp(-bb)) / (-std::expm1(-bb));
}

double csch_half_beta_bar(const PhysicalParams& params) {
  if (params.zero_temperature()) return 0.0;
  const double bb = params.beta_bar();
  return 2.0 * std::exp(-0.5 * bb) / (-std::expm1(-bb));
}

DimensionlessPoint nondimensionalize(const ThermalPoint& point, const PhysicalParams& params) {
  const double scale = 1.0 / params.length_scale();
  return {scale * point.x, scale * point.x_tilde};
}

}  // namespace ntfd
