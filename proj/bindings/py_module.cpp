#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nelson_tfd/analytic.hpp"
#include "nelson_tfd/fields.hpp"
#include "nelson_tfd/io.hpp"
#include "nelson_tfd/params.hpp"
#include "nelson_tfd/sde.hpp"
#include "nelson_tfd/stats.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

ntfd::EnsembleConfig make_config(const ntfd::PhysicalParams& params, std::int64_t paths, double dt,
                                 double horizon, std::uint64_t seed, const std::string& init,
                                 const std::string& group, double x0, double xt0, double burn_in,
                                 int dump_paths, int dump_stride, int record_stride, int threads) {
  ntfd::EnsembleConfig config = ntfd::EnsembleConfig::defaults(params);
  config.n_paths = paths;
  if (dt > 0) config.dt = dt;
  if (horizon >= 0) config.horizon = horizon;
  config.base_seed = seed;
  if (init == "stationary") config.init = ntfd::InitMode::StationaryExact;
  else if (init == "point") config.init = ntfd::InitMode::Point;
  else if (init == "burn-in") config.init = ntfd::InitMode::BurnIn;
  else throw std::invalid_argument("init must be stationary|point|burn-in");
  if (group == "forward") config.group = ntfd::GroupMode::Forward;
  else if (group == "backward") config.group = ntfd::GroupMode::Backward;
  else throw std::invalid_argument("group must be forward|backward");
  config.x0 = x0;
  config.xt0 = xt0;
  if (burn_in >= 0) config.burn_in = burn_in;
  config.dump_paths = dump_paths;
  config.dump_stride = dump_stride;
  config.record_stride = record_stride;
  config.threads = threads;
  return config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Finite-temperature Nelson stochastic mechanics: thermal-oscillator "
            "closed forms, grouped SDE ensembles, and field-equation residual checks";
  m.attr("__version__") = ntfd::kVersion;

  py::class_<ntfd::PhysicalParams>(m, "PhysicalParams")
      .def(py::init<double, double, double, double>(), "m"_a = 1.0, "omega"_a = 1.0,
           "hbar"_a = 1.0, "beta"_a = std::numeric_limits<double>::infinity())
      .def_static("from_beta_bar", &ntfd::PhysicalParams::from_beta_bar, "beta_bar"_a,
                  "m"_a = 1.0, "omega"_a = 1.0, "hbar"_a = 1.0)
      .def_readonly("m", &ntfd::PhysicalParams::m)
      .def_readonly("omega", &ntfd::PhysicalParams::omega)
      .def_readonly("hbar", &ntfd::PhysicalParams::hbar)
      .def_readonly("beta", &ntfd::PhysicalParams::beta)
      .def("beta_bar", &ntfd::PhysicalParams::beta_bar)
      .def("zero_temperature", &ntfd::PhysicalParams::zero_temperature)
      .def("length_scale", &ntfd::PhysicalParams::length_scale);

  py::class_<ntfd::ThermalPoint>(m, "ThermalPoint")
      .def(py::init<double, double, double>(), "x"_a = 0.0, "x_tilde"_a = 0.0, "t"_a = 0.0)
      .def_readwrite("x", &ntfd::ThermalPoint::x)
      .def_readwrite("x_tilde", &ntfd::ThermalPoint::x_tilde)
      .def_readwrite("t", &ntfd::ThermalPoint::t);

  m.def("thermal_occupation", &ntfd::thermal_occupation, "params"_a);
  m.def("partition_function", &ntfd::partition_function, "params"_a);
  m.def("nondimensionalize", [](const ntfd::ThermalPoint& p, const ntfd::PhysicalParams& params) {
    const auto d = ntfd::nondimensionalize(p, params);
    return std::make_pair(d.X, d.X_tilde);
  }, "point"_a, "params"_a);

  py::class_<ntfd::DriftValues>(m, "DriftValues")
      .def_readonly("b", &ntfd::DriftValues::b)
      .def_readonly("b_star", &ntfd::DriftValues::b_star)
      .def_readonly("b_tilde", &ntfd::DriftValues::b_tilde)
      .def_readonly("b_tilde_star", &ntfd::DriftValues::b_tilde_star);

  py::class_<ntfd::StationaryCovariance>(m, "StationaryCovariance")
      .def_readonly("var_x", &ntfd::StationaryCovariance::var_x)
      .def_readonly("var_x_tilde", &ntfd::StationaryCovariance::var_x_tilde)
      .def_readonly("cov_xxt", &ntfd::StationaryCovariance::cov_xxt);

  py::class_<ntfd::EquilibriumSolution>(m, "EquilibriumSolution")
      .def(py::init<const ntfd::PhysicalParams&>(), "params"_a)
      .def("r_eq", &ntfd::EquilibriumSolution::r_eq, "x"_a, "x_tilde"_a)
      .def("s_eq", &ntfd::EquilibriumSolution::s_eq, "x"_a, "x_tilde"_a)
      .def("drift_eq", &ntfd::EquilibriumSolution::drift_eq, "x"_a, "x_tilde"_a)
      .def("stationary_covariance", &ntfd::EquilibriumSolution::stationary_covariance)
      .def("momentum_half_diff_variance", &ntfd::EquilibriumSolution::momentum_half_diff_variance)
      .def("uncertainty_product", &ntfd::EquilibriumSolution::uncertainty_product);

  m.def("transform_coordinates",
        [](const ntfd::ThermalPoint& p, const ntfd::PhysicalParams& params) {
          const auto t = ntfd::transform_coordinates(p, params);
          return std::make_pair(t.X, t.X_tilde);
        },
        "point"_a, "params"_a);
  m.def("inverse_transform",
        [](double X, double X_tilde, const ntfd::PhysicalParams& params) {
          const auto p = ntfd::inverse_transform({X, X_tilde}, params);
          return std::make_pair(p.x, p.x_tilde);
        },
        "X"_a, "X_tilde"_a, "params"_a);

  py::class_<ntfd::Ensemble>(m, "Ensemble")
      .def_property_readonly("n_paths",
                             [](const ntfd::Ensemble& e) { return e.final_points.size(); })
      .def("final_x",
           [](const ntfd::Ensemble& e) {
             std::vector<double> out;
             out.reserve(e.final_points.size());
             for (const auto& p : e.final_points) out.push_back(p.x);
             return out;
           })
      .def("final_x_tilde", [](const ntfd::Ensemble& e) {
        std::vector<double> out;
        out.reserve(e.final_points.size());
        for (const auto& p : e.final_points) out.push_back(p.x_tilde);
        return out;
      });

  m.def("simulate_ensemble",
        [](const ntfd::PhysicalParams& params, std::int64_t paths, double dt, double horizon,
           std::uint64_t seed, const std::string& init, const std::string& group, double x0,
           double xt0, double burn_in, int dump_paths, int dump_stride, int record_stride,
           int threads) {
          return ntfd::simulate_ensemble(make_config(params, paths, dt, horizon, seed, init, group,
                                                     x0, xt0, burn_in, dump_paths, dump_stride,
                                                     record_stride, threads));
        },
        "params"_a, "paths"_a = 10000, "dt"_a = -1.0, "horizon"_a = -1.0, "seed"_a = 0,
        "init"_a = "stationary", "group"_a = "forward", "x0"_a = 0.0, "xt0"_a = 0.0,
        "burn_in"_a = -1.0, "dump_paths"_a = 0, "dump_stride"_a = 1, "record_stride"_a = 0,
        "threads"_a = 0, py::call_guard<py::gil_scoped_release>());

  m.def("simulate_transformed_ensemble",
        [](const ntfd::PhysicalParams& params, std::int64_t paths, double dt, double horizon,
           std::uint64_t seed, const std::string& init, double x0, double xt0, int threads) {
          return ntfd::simulate_transformed_ensemble(make_config(
              params, paths, dt, horizon, seed, init, "forward", x0, xt0, -1.0, 0, 1, 0, threads));
        },
        "params"_a, "paths"_a = 10000, "dt"_a = -1.0, "horizon"_a = -1.0, "seed"_a = 0,
        "init"_a = "stationary", "x0"_a = 0.0, "xt0"_a = 0.0, "threads"_a = 0,
        py::call_guard<py::gil_scoped_release>());

  py::class_<ntfd::MomentEstimates>(m, "MomentEstimates")
      .def_readonly("n", &ntfd::MomentEstimates::n)
      .def_readonly("samples", &ntfd::MomentEstimates::samples)
      .def_readonly("mean_x", &ntfd::MomentEstimates::mean_x)
      .def_readonly("se_mean_x", &ntfd::MomentEstimates::se_mean_x)
      .def_readonly("mean_xt", &ntfd::MomentEstimates::mean_xt)
      .def_readonly("se_mean_xt", &ntfd::MomentEstimates::se_mean_xt)
      .def_readonly("var_x", &ntfd::MomentEstimates::var_x)
      .def_readonly("se_var_x", &ntfd::MomentEstimates::se_var_x)
      .def_readonly("var_xt", &ntfd::MomentEstimates::var_xt)
      .def_readonly("se_var_xt", &ntfd::MomentEstimates::se_var_xt)
      .def_readonly("cov_xxt", &ntfd::MomentEstimates::cov_xxt)
      .def_readonly("se_cov_xxt", &ntfd::MomentEstimates::se_cov_xxt);

  m.def("moment_estimates",
        [](const ntfd::Ensemble& e, const std::string& slice) {
          return ntfd::moment_estimates(e, slice == "pooled" ? ntfd::SampleSlice::Pooled
                                                             : ntfd::SampleSlice::Final);
        },
        "ensemble"_a, "slice"_a = "final");

  py::class_<ntfd::UncertaintyReport>(m, "UncertaintyReport")
      .def_readonly("std_x", &ntfd::UncertaintyReport::std_x)
      .def_readonly("se_std_x", &ntfd::UncertaintyReport::se_std_x)
      .def_readonly("std_halfdiff_p", &ntfd::UncertaintyReport::std_halfdiff_p)
      .def_readonly("se_std_halfdiff_p", &ntfd::UncertaintyReport::se_std_halfdiff_p)
      .def_readonly("product", &ntfd::UncertaintyReport::product)
      .def_readonly("se_product", &ntfd::UncertaintyReport::se_product)
      .def_readonly("analytic_product", &ntfd::UncertaintyReport::analytic_product)
      .def_readonly("n_occupation", &ntfd::UncertaintyReport::n_occupation);

  m.def("uncertainty_estimate",
        [](const ntfd::Ensemble& e, const ntfd::PhysicalParams& params, const std::string& slice) {
          const ntfd::EquilibriumSolution eq(params);
          return ntfd::uncertainty_estimate(e, eq.drift_set(), params,
                                            slice == "pooled" ? ntfd::SampleSlice::Pooled
                                                              : ntfd::SampleSlice::Final);
        },
        "ensemble"_a, "params"_a, "slice"_a = "final");

  py::class_<ntfd::Histogram>(m, "Histogram")
      .def("bins", &ntfd::Histogram::bins)
      .def("edge", &ntfd::Histogram::edge, "i"_a)
      .def("count", &ntfd::Histogram::count, "i"_a)
      .def("density", &ntfd::Histogram::density, "i"_a)
      .def("underflow", &ntfd::Histogram::underflow)
      .def("overflow", &ntfd::Histogram::overflow)
      .def("total", &ntfd::Histogram::total);

  m.def("marginal_histogram",
        [](const ntfd::Ensemble& e, const std::string& coordinate, int bins, double lo, double hi,
           const std::string& slice) {
          return ntfd::marginal_histogram(
              e, coordinate == "x_tilde" ? ntfd::Coordinate::XTilde : ntfd::Coordinate::X, bins, lo,
              hi, slice == "pooled" ? ntfd::SampleSlice::Pooled : ntfd::SampleSlice::Final);
        },
        "ensemble"_a, "coordinate"_a, "bins"_a, "lo"_a, "hi"_a, "slice"_a = "final");

  py::class_<ntfd::ChiSquareResult>(m, "ChiSquareResult")
      .def_readonly("statistic", &ntfd::ChiSquareResult::statistic)
      .def_readonly("p_value", &ntfd::ChiSquareResult::p_value)
      .def_readonly("dof", &ntfd::ChiSquareResult::dof)
      .def_readonly("cells", &ntfd::ChiSquareResult::cells);

  m.def("gaussian_chi_square_test",
        [](const ntfd::Histogram& hist, double mean, double variance, double min_expected) {
          return ntfd::distribution_test(hist, ntfd::gaussian_distribution(mean, variance),
                                         min_expected);
        },
        "histogram"_a, "mean"_a, "variance"_a, "min_expected"_a = 5.0);

  m.def("equilibrium_residual_norms",
        [](const ntfd::PhysicalParams& params, double extent, double spacing) {
          const ntfd::EquilibriumSolution eq(params);
          const auto r_field = ntfd::equilibrium_r_field(eq);
          const auto s_field = ntfd::equilibrium_s_field();
          const auto density = ntfd::equilibrium_density_field(eq);
          const auto vel = ntfd::velocities_from_rs(r_field, s_field, params);
          const auto drifts = eq.drift_set();
          ntfd::ResidualOptions opts = ntfd::ResidualOptions::defaults(params);
          if (extent > 0 && spacing > 0) opts.grid = ntfd::GridSpec::make(extent, spacing);
          opts.method = ntfd::DiffMethod::ClosedForm;
          py::dict out;
          out["osmotic"] = ntfd::osmotic_residual(vel, density, params, opts);
          out["continuity"] = ntfd::continuity_residual(vel, density, params, opts);
          out["fokker_planck_forward"] = ntfd::fokker_planck_residual(
              drifts, density, params, ntfd::FPDirection::Forward, opts);
          out["fokker_planck_backward"] = ntfd::fokker_planck_residual(
              drifts, density, params, ntfd::FPDirection::Backward, opts);
          out["kinematical"] = ntfd::kinematical_residual(vel, params, opts);
          out["dynamical"] =
              ntfd::dynamical_residual(vel, ntfd::Potential1D::harmonic(params), params, opts);
          return out;
        },
        "params"_a, "extent"_a = 0.0, "spacing"_a = 0.0);
}
