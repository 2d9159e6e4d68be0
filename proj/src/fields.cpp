#include "nelson_tfd/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace ntfd {

namespace {

constexpr double kPi = 3.14159265358979323846;

double fd_first_step(const PhysicalParams& params, double requested) {
  return requested > 0.0 ? requested : 1e-5 * params.length_scale();
}

double fd_second_step(const PhysicalParams& params, double requested) {
  return requested > 0.0 ? requested : 1e-2 * params.length_scale();
}

}  // namespace

GridSpec GridSpec::make(double extent, double spacing) {
  if (!(extent > 0.0) || !(spacing > 0.0)) {
    throw std::invalid_argument("grid extent and spacing must be positive");
  }
  GridSpec spec;
  spec.extent = extent;
  spec.n = static_cast<int>(std::lround(2.0 * extent / spacing)) + 1;
  if (spec.n < 5) throw std::invalid_argument("grid too small: need at least 5 nodes per axis");
  spec.spacing = 2.0 * extent / (spec.n - 1);  // make the nodes span [-L, L] exactly
  return spec;
}

ScalarField2D ScalarField2D::closed_form(Fn value) {
  ScalarField2D field;
  field.value_ = std::move(value);
  return field;
}

ScalarField2D ScalarField2D::closed_form(Fn value, Derivatives derivatives) {
  ScalarField2D field;
  field.value_ = std::move(value);
  field.derivatives_ = std::move(derivatives);
  return field;
}

ScalarField2D ScalarField2D::grid(GridSpec spec, std::vector<double> values) {
  if (static_cast<std::int64_t>(values.size()) !=
      static_cast<std::int64_t>(spec.n) * spec.n) {
    throw std::invalid_argument("grid values size does not match spec");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("grid values must be finite");
  }
  ScalarField2D field;
  field.is_grid_ = true;
  field.spec_ = spec;
  field.values_ = std::move(values);
  return field;
}

const GridSpec& ScalarField2D::spec() const {
  if (!is_grid_) throw std::logic_error("field has no grid spec");
  return spec_;
}

double ScalarField2D::node(int i, int j) const {
  if (!is_grid_) throw std::logic_error("field has no grid nodes");
  return values_[static_cast<std::size_t>(i) * spec_.n + j];
}

const std::vector<double>& ScalarField2D::values() const {
  if (!is_grid_) throw std::logic_error("field has no grid values");
  return values_;
}

double ScalarField2D::value(double x, double x_tilde) const {
  if (!is_grid_) return value_(x, x_tilde);
  const double h = spec_.spacing;
  const int n = spec_.n;
  double fx = (x + spec_.extent) / h;
  double fy = (x_tilde + spec_.extent) / h;
  fx = std::clamp(fx, 0.0, static_cast<double>(n - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(n - 1));
  const int i = std::min(static_cast<int>(fx), n - 2);
  const int j = std::min(static_cast<int>(fy), n - 2);
  const double ax = fx - i;
  const double ay = fy - j;
  return (1 - ax) * (1 - ay) * node(i, j) + ax * (1 - ay) * node(i + 1, j) +
         (1 - ax) * ay * node(i, j + 1) + ax * ay * node(i + 1, j + 1);
}

ScalarField2D ScalarField2D::sampled(const GridSpec& spec) const {
  std::vector<double> values(static_cast<std::size_t>(spec.n) * spec.n);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      values[static_cast<std::size_t>(i) * spec.n + j] = value(spec.coord(i), spec.coord(j));
    }
  }
  return grid(spec, std::move(values));
}

void save_grid_field(const std::string& path, const ScalarField2D& field) {
  const ScalarField2D* grid_field = &field;
  if (!field.is_grid()) throw std::invalid_argument("save_grid_field expects a grid field");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const GridSpec& spec = grid_field->spec();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g %.12g\n", spec.extent, spec.spacing);
  out << buf;
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.n; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", grid_field->node(i, j));
      out << buf << (j + 1 == spec.n ? "\n" : " ");
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ScalarField2D load_grid_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  double extent = 0.0, spacing = 0.0;
  if (!(in >> extent >> spacing)) throw std::runtime_error("bad grid header in " + path);
  const GridSpec spec = GridSpec::make(extent, spacing);
  std::vector<double> values(static_cast<std::size_t>(spec.n) * spec.n);
  for (double& v : values) {
    if (!(in >> v)) throw std::runtime_error("truncated grid data in " + path);
  }
  return ScalarField2D::grid(spec, std::move(values));
}

namespace {

// Uniform value+derivative access for closed-form fields; analytic partials
// when present, tight central differences otherwise.
struct FieldEval {
  const ScalarField2D* field;
  double h1, h2;

  double value(double x, double y) const { return field->value(x, y); }
  double dx(double x, double y) const {
    const auto& d = field->derivatives();
    if (d.dx) return d.dx(x, y);
    return (field->value(x + h1, y) - field->value(x - h1, y)) / (2.0 * h1);
  }
  double dxt(double x, double y) const {
    const auto& d = field->derivatives();
    if (d.dxt) return d.dxt(x, y);
    return (field->value(x, y + h1) - field->value(x, y - h1)) / (2.0 * h1);
  }
  double dxx(double x, double y) const {
    const auto& d = field->derivatives();
    if (d.dxx) return d.dxx(x, y);
    return (field->value(x + h2, y) - 2.0 * field->value(x, y) + field->value(x - h2, y)) /
           (h2 * h2);
  }
  double dxtxt(double x, double y) const {
    const auto& d = field->derivatives();
    if (d.dxtxt) return d.dxtxt(x, y);
    return (field->value(x, y + h2) - 2.0 * field->value(x, y) + field->value(x, y - h2)) /
           (h2 * h2);
  }
};

using NodeFn = std::function<double(int, int)>;

NodeFn node_fn(const ScalarField2D& field, const GridSpec& grid) {
  if (field.is_grid()) {
    if (!(field.spec() == grid)) {
      throw std::invalid_argument("grid field spec does not match the evaluation grid");
    }
    const double* data = field.values().data();
    const int n = grid.n;
    return [data, n](int i, int j) { return data[static_cast<std::size_t>(i) * n + j]; };
  }
  return [&field, grid](int i, int j) { return field.value(grid.coord(i), grid.coord(j)); };
}

DiffMethod resolve_method(DiffMethod requested, std::initializer_list<const ScalarField2D*> fields) {
  if (requested != DiffMethod::Auto) {
    if (requested == DiffMethod::ClosedForm) {
      for (const ScalarField2D* f : fields) {
        if (f->is_grid()) {
          throw std::invalid_argument("closed-form residual method requires closed-form fields");
        }
      }
    }
    return requested;
  }
  for (const ScalarField2D* f : fields) {
    if (f->is_grid()) return DiffMethod::Stencil;
  }
  return DiffMethod::ClosedForm;
}

ResidualOptions with_defaults(const ResidualOptions& opts, const PhysicalParams& params) {
  ResidualOptions result = opts;
  if (result.grid.n == 0) result.grid = default_residual_grid(params);
  if (result.margin < 0) result.margin = 0;
  result.fd_first = fd_first_step(params, result.fd_first);
  result.fd_second = fd_second_step(params, result.fd_second);
  return result;
}

// Stencils reach one node outward, so the stencil path needs margin >= 1;
// closed-form evaluation can use the full box.
int stencil_margin(const ResidualOptions& opts) { return std::max(opts.margin, 1); }

// Evaluate a residual over interior nodes. kernel(i, j, x, y) -> value.
template <class Kernel>
std::vector<double> interior_map(const GridSpec& grid, int margin, const Kernel& kernel) {
  const int lo = margin;
  const int hi = grid.n - margin;
  if (hi <= lo) throw std::invalid_argument("grid too small for the requested margin");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(hi - lo) * (hi - lo));
  for (int i = lo; i < hi; ++i) {
    const double x = grid.coord(i);
    for (int j = lo; j < hi; ++j) {
      out.push_back(kernel(i, j, x, grid.coord(j)));
    }
  }
  return out;
}

double max_abs(const std::vector<double>& values) {
  double result = 0.0;
  for (double v : values) result = std::max(result, std::abs(v));
  return result;
}

void check_positive_density(const ScalarField2D& density, const GridSpec& grid) {
  const NodeFn p = node_fn(density, grid);
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      if (!(p(i, j) > 0.0)) {
        throw std::invalid_argument("density must be strictly positive on the grid");
      }
    }
  }
}

double drift_partial_dx(const DriftSet::Field& field, const DriftSet::Field& analytic, double x,
                        double y, double h1) {
  if (analytic) return analytic(x, y, 0.0);
  return (field(x + h1, y, 0.0) - field(x - h1, y, 0.0)) / (2.0 * h1);
}

double drift_partial_dxt(const DriftSet::Field& field, const DriftSet::Field& analytic, double x,
                         double y, double h1) {
  if (analytic) return analytic(x, y, 0.0);
  return (field(x, y + h1, 0.0) - field(x, y - h1, 0.0)) / (2.0 * h1);
}

}  // namespace

GridSpec default_residual_grid(const PhysicalParams& params) {
  const EquilibriumSolution eq(params);
  const double extent = 6.0 * std::sqrt(eq.stationary_covariance().var_x);
  const double spacing = 0.005 * params.length_scale();
  return GridSpec::make(extent, spacing);
}

ResidualOptions ResidualOptions::defaults(const PhysicalParams& params) {
  ResidualOptions opts;
  opts.grid = default_residual_grid(params);
  opts.fd_first = fd_first_step(params, 0.0);
  opts.fd_second = fd_second_step(params, 0.0);
  return opts;
}

VelocityFields velocities_from_rs(const ScalarField2D& r_field, const ScalarField2D& s_field,
                                  const PhysicalParams& params) {
  const double scale = params.hbar / params.m;

  auto closed_component = [&](const ScalarField2D& f, bool tilde_direction, double sign) {
    const double h1 = fd_first_step(params, 0.0);
    auto eval = std::make_shared<ScalarField2D>(f);
    ScalarField2D::Fn value = [eval, scale, sign, tilde_direction, h1](double x, double y) {
      FieldEval fe{eval.get(), h1, 0.0};
      return sign * scale * (tilde_direction ? fe.dxt(x, y) : fe.dx(x, y));
    };
    ScalarField2D::Derivatives derivs;
    const auto& d = eval->derivatives();
    if (!tilde_direction) {
      // component = sign*scale*df/dx: dx needs dxx, dxt needs dxxt
      if (d.dxx) derivs.dx = [eval, scale, sign](double x, double y) { return sign * scale * eval->derivatives().dxx(x, y); };
      if (d.dxxt) derivs.dxt = [eval, scale, sign](double x, double y) { return sign * scale * eval->derivatives().dxxt(x, y); };
    } else {
      // component = sign*scale*df/dx~: dx needs dxxt, dxt needs dxtxt
      if (d.dxxt) derivs.dx = [eval, scale, sign](double x, double y) { return sign * scale * eval->derivatives().dxxt(x, y); };
      if (d.dxtxt) derivs.dxt = [eval, scale, sign](double x, double y) { return sign * scale * eval->derivatives().dxtxt(x, y); };
    }
    return ScalarField2D::closed_form(std::move(value), std::move(derivs));
  };

  auto grid_component = [&](const ScalarField2D& f, bool tilde_direction, double sign) {
    const GridSpec& spec = f.spec();
    const int n = spec.n;
    const double h = spec.spacing;

    auto derivative_at = [&](int i, int j, int stride) {
      // central difference with the given node stride; one-sided second-order
      // stencils at the edges keep the output grid full-size.
      const int step = stride;
      auto val = [&](int a, int b) { return f.node(a, b); };
      if (!tilde_direction) {
        if (i - step < 0) return (-3.0 * val(i, j) + 4.0 * val(i + step, j) - val(i + 2 * step, j)) / (2.0 * step * h);
        if (i + step >= n) return (3.0 * val(i, j) - 4.0 * val(i - step, j) + val(i - 2 * step, j)) / (2.0 * step * h);
        return (val(i + step, j) - val(i - step, j)) / (2.0 * step * h);
      }
      if (j - step < 0) return (-3.0 * val(i, j) + 4.0 * val(i, j + step) - val(i, j + 2 * step)) / (2.0 * step * h);
      if (j + step >= n) return (3.0 * val(i, j) - 4.0 * val(i, j - step) + val(i, j - 2 * step)) / (2.0 * step * h);
      return (val(i, j + step) - val(i, j - step)) / (2.0 * step * h);
    };

    // h vs 2h convergence check over the interior.
    double max_diff = 0.0, max_mag = 0.0;
    for (int i = 2; i < n - 2; ++i) {
      for (int j = 2; j < n - 2; ++j) {
        const double fine = derivative_at(i, j, 1);
        const double coarse = derivative_at(i, j, 2);
        max_diff = std::max(max_diff, std::abs(fine - coarse));
        max_mag = std::max(max_mag, std::abs(fine));
      }
    }
    if (max_diff > 0.10 * max_mag + 1e-14) {
      throw GridConvergenceError(
          "grid too coarse: derivative estimates at h and 2h differ by more than 10%");
    }

    std::vector<double> values(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        values[static_cast<std::size_t>(i) * n + j] = sign * scale * derivative_at(i, j, 1);
      }
    }
    return ScalarField2D::grid(spec, std::move(values));
  };

  auto component = [&](const ScalarField2D& f, bool tilde_direction, double sign) {
    return f.is_grid() ? grid_component(f, tilde_direction, sign)
                       : closed_component(f, tilde_direction, sign);
  };

  VelocityFields vel;
  vel.v = component(s_field, false, 1.0);
  vel.v_tilde = component(s_field, true, -1.0);
  vel.u = component(r_field, false, 1.0);
  vel.u_tilde = component(r_field, true, 1.0);
  return vel;
}

DriftSet drift_set_from_rs(const ScalarField2D& r_field, const ScalarField2D& s_field,
                           const PhysicalParams& params) {
  auto vel = std::make_shared<VelocityFields>(velocities_from_rs(r_field, s_field, params));
  DriftSet drifts;
  // b = v + u, b* = v - u, b~ = u~ + v~, b~* = v~ - u~ (gradient relations).
  drifts.b = [vel](double x, double y, double) { return vel->v.value(x, y) + vel->u.value(x, y); };
  drifts.b_star = [vel](double x, double y, double) { return vel->v.value(x, y) - vel->u.value(x, y); };
  drifts.b_tilde = [vel](double x, double y, double) { return vel->u_tilde.value(x, y) + vel->v_tilde.value(x, y); };
  drifts.b_tilde_star = [vel](double x, double y, double) { return vel->v_tilde.value(x, y) - vel->u_tilde.value(x, y); };
  const bool x_partials = !vel->v.is_grid() && !vel->u.is_grid() &&
                          static_cast<bool>(vel->v.derivatives().dx) &&
                          static_cast<bool>(vel->u.derivatives().dx);
  if (x_partials) {
    drifts.db_dx = [vel](double x, double y, double) {
      return vel->v.derivatives().dx(x, y) + vel->u.derivatives().dx(x, y);
    };
    drifts.db_star_dx = [vel](double x, double y, double) {
      return vel->v.derivatives().dx(x, y) - vel->u.derivatives().dx(x, y);
    };
  }
  const bool xt_partials = !vel->v_tilde.is_grid() && !vel->u_tilde.is_grid() &&
                           static_cast<bool>(vel->v_tilde.derivatives().dxt) &&
                           static_cast<bool>(vel->u_tilde.derivatives().dxt);
  if (xt_partials) {
    drifts.db_tilde_dxt = [vel](double x, double y, double) {
      return vel->u_tilde.derivatives().dxt(x, y) + vel->v_tilde.derivatives().dxt(x, y);
    };
    drifts.db_tilde_star_dxt = [vel](double x, double y, double) {
      return vel->v_tilde.derivatives().dxt(x, y) - vel->u_tilde.derivatives().dxt(x, y);
    };
  }
  return drifts;
}

ScalarField2D equilibrium_r_field(const EquilibriumSolution& eq) {
  const EquilibriumSolution copy = eq;
  ScalarField2D::Derivatives derivs;
  derivs.dx = [copy](double x, double y) { return copy.r_eq_dx(x, y); };
  derivs.dxt = [copy](double x, double y) { return copy.r_eq_dxt(x, y); };
  derivs.dxx = [copy](double, double) { return copy.r_eq_dxx(); };
  derivs.dxtxt = [copy](double, double) { return copy.r_eq_dxtxt(); };
  derivs.dxxt = [copy](double, double) { return copy.r_eq_dxxt(); };
  return ScalarField2D::closed_form([copy](double x, double y) { return copy.r_eq(x, y); },
                                    std::move(derivs));
}

ScalarField2D equilibrium_s_field() {
  auto zero = [](double, double) { return 0.0; };
  ScalarField2D::Derivatives derivs;
  derivs.dx = zero;
  derivs.dxt = zero;
  derivs.dxx = zero;
  derivs.dxtxt = zero;
  derivs.dxxt = zero;
  return ScalarField2D::closed_form(zero, std::move(derivs));
}

ScalarField2D equilibrium_density_field(const EquilibriumSolution& eq) {
  const EquilibriumSolution copy = eq;
  const PhysicalParams& p = eq.params();
  const double norm = p.m * p.omega / (kPi * p.hbar);
  auto density = [copy, norm](double x, double y) { return norm * std::exp(2.0 * copy.r_eq(x, y)); };
  ScalarField2D::Derivatives derivs;
  derivs.dx = [copy, density](double x, double y) { return 2.0 * copy.r_eq_dx(x, y) * density(x, y); };
  derivs.dxt = [copy, density](double x, double y) { return 2.0 * copy.r_eq_dxt(x, y) * density(x, y); };
  derivs.dxx = [copy, density](double x, double y) {
    const double rx = copy.r_eq_dx(x, y);
    return (2.0 * copy.r_eq_dxx() + 4.0 * rx * rx) * density(x, y);
  };
  derivs.dxtxt = [copy, density](double x, double y) {
    const double rxt = copy.r_eq_dxt(x, y);
    return (2.0 * copy.r_eq_dxtxt() + 4.0 * rxt * rxt) * density(x, y);
  };
  derivs.dxxt = [copy, density](double x, double y) {
    return (2.0 * copy.r_eq_dxxt() + 4.0 * copy.r_eq_dx(x, y) * copy.r_eq_dxt(x, y)) * density(x, y);
  };
  return ScalarField2D::closed_form(density, std::move(derivs));
}

Potential1D Potential1D::harmonic(const PhysicalParams& params) {
  const double k = params.m * params.omega * params.omega;
  return {[k](double x) { return 0.5 * k * x * x; }, [k](double x) { return k * x; }};
}

Potential1D Potential1D::zero() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; }};
}

std::vector<double> osmotic_residual_field(const VelocityFields& vel, const ScalarField2D& density,
                                           const PhysicalParams& params,
                                           const ResidualOptions& opts_in) {
  const ResidualOptions opts = with_defaults(opts_in, params);
  const DiffMethod method =
      resolve_method(opts.method, {&vel.u, &vel.u_tilde, &density});
  const double k = 0.5 * params.hbar / params.m;
  check_positive_density(density, opts.grid);

  if (method == DiffMethod::ClosedForm) {
    FieldEval p{&density, opts.fd_first, opts.fd_second};
    FieldEval u{&vel.u, opts.fd_first, opts.fd_second};
    FieldEval ut{&vel.u_tilde, opts.fd_first, opts.fd_second};
    return interior_map(opts.grid, opts.margin, [&](int, int, double x, double y) {
      const double pv = p.value(x, y);
      const double rx = u.value(x, y) - k * p.dx(x, y) / pv;
      const double rt = ut.value(x, y) - k * p.dxt(x, y) / pv;
      return std::max(std::abs(rx), std::abs(rt));
    });
  }

  const NodeFn pn = node_fn(density, opts.grid);
  const NodeFn un = node_fn(vel.u, opts.grid);
  const NodeFn utn = node_fn(vel.u_tilde, opts.grid);
  const double h2 = 2.0 * opts.grid.spacing;
  return interior_map(opts.grid, stencil_margin(opts), [&](int i, int j, double, double) {
    const double rx = un(i, j) - k * (std::log(pn(i + 1, j)) - std::log(pn(i - 1, j))) / h2;
    const double rt = utn(i, j) - k * (std::log(pn(i, j + 1)) - std::log(pn(i, j - 1))) / h2;
    return std::max(std::abs(rx), std::abs(rt));
  });
}

double osmotic_residual(const VelocityFields& vel, const ScalarField2D& density,
                        const PhysicalParams& params, const ResidualOptions& opts) {
  return max_abs(osmotic_residual_field(vel, density, params, opts));
}

std::vector<double> continuity_residual_field(const VelocityFields& vel,
                                              const ScalarField2D& density,
                                              const PhysicalParams& params,
                                              const ResidualOptions& opts_in) {
  const ResidualOptions opts = with_defaults(opts_in, params);
  const DiffMethod method = resolve_method(opts.method, {&vel.v, &vel.v_tilde, &density});
  check_positive_density(density, opts.grid);

  if (method == DiffMethod::ClosedForm) {
    FieldEval p{&density, opts.fd_first, opts.fd_second};
    FieldEval v{&vel.v, opts.fd_first, opts.fd_second};
    FieldEval vt{&vel.v_tilde, opts.fd_first, opts.fd_second};
    return interior_map(opts.grid, opts.margin, [&](int, int, double x, double y) {
      const double pv = p.value(x, y);
      return -(v.dx(x, y) * pv + v.value(x, y) * p.dx(x, y)) -
             (vt.dxt(x, y) * pv + vt.value(x, y) * p.dxt(x, y));
    });
  }

  const NodeFn pn = node_fn(density, opts.grid);
  const NodeFn vn = node_fn(vel.v, opts.grid);
  const NodeFn vtn = node_fn(vel.v_tilde, opts.grid);
  const double h2 = 2.0 * opts.grid.spacing;
  return interior_map(opts.grid, stencil_margin(opts), [&](int i, int j, double, double) {
    const double div_x = (vn(i + 1, j) * pn(i + 1, j) - vn(i - 1, j) * pn(i - 1, j)) / h2;
    const double div_t = (vtn(i, j + 1) * pn(i, j + 1) - vtn(i, j - 1) * pn(i, j - 1)) / h2;
    return -div_x - div_t;
  });
}

double continuity_residual(const VelocityFields& vel, const ScalarField2D& density,
                           const PhysicalParams& params, const ResidualOptions& opts) {
  return max_abs(continuity_residual_field(vel, density, params, opts));
}

std::vector<double> fokker_planck_residual_field(const DriftSet& drifts,
                                                 const ScalarField2D& density,
                                                 const PhysicalParams& params, FPDirection direction,
                                                 const ResidualOptions& opts_in) {
  const ResidualOptions opts = with_defaults(opts_in, params);
  const DiffMethod method = resolve_method(opts.method, {&density});
  const double k = 0.5 * params.hbar / params.m;
  const double diffusion_sign = direction == FPDirection::Forward ? 1.0 : -1.0;
  const DriftSet::Field& drift_x = direction == FPDirection::Forward ? drifts.b : drifts.b_star;
  const DriftSet::Field& drift_t =
      direction == FPDirection::Forward ? drifts.b_tilde_star : drifts.b_tilde;
  const DriftSet::Field& partial_x =
      direction == FPDirection::Forward ? drifts.db_dx : drifts.db_star_dx;
  const DriftSet::Field& partial_t =
      direction == FPDirection::Forward ? drifts.db_tilde_star_dxt : drifts.db_tilde_dxt;
  check_positive_density(density, opts.grid);

  if (method == DiffMethod::ClosedForm) {
    FieldEval p{&density, opts.fd_first, opts.fd_second};
    return interior_map(opts.grid, opts.margin, [&](int, int, double x, double y) {
      const double pv = p.value(x, y);
      const double bx = drift_partial_dx(drift_x, partial_x, x, y, opts.fd_first);
      const double bt = drift_partial_dxt(drift_t, partial_t, x, y, opts.fd_first);
      return -(bx * pv + drift_x(x, y, 0.0) * p.dx(x, y)) -
             (bt * pv + drift_t(x, y, 0.0) * p.dxt(x, y)) +
             diffusion_sign * k * (p.dxx(x, y) - p.dxtxt(x, y));
    });
  }

  const NodeFn pn = node_fn(density, opts.grid);
  const GridSpec& g = opts.grid;
  const double h = g.spacing;
  auto flux_x = [&](int i, int j) { return drift_x(g.coord(i), g.coord(j), 0.0) * pn(i, j); };
  auto flux_t = [&](int i, int j) { return drift_t(g.coord(i), g.coord(j), 0.0) * pn(i, j); };
  return interior_map(opts.grid, stencil_margin(opts), [&](int i, int j, double, double) {
    const double div_x = (flux_x(i + 1, j) - flux_x(i - 1, j)) / (2.0 * h);
    const double div_t = (flux_t(i, j + 1) - flux_t(i, j - 1)) / (2.0 * h);
    const double lap_x = (pn(i + 1, j) - 2.0 * pn(i, j) + pn(i - 1, j)) / (h * h);
    const double lap_t = (pn(i, j + 1) - 2.0 * pn(i, j) + pn(i, j - 1)) / (h * h);
    return -div_x - div_t + diffusion_sign * k * (lap_x - lap_t);
  });
}

double fokker_planck_residual(const DriftSet& drifts, const ScalarField2D& density,
                              const PhysicalParams& params, FPDirection direction,
                              const ResidualOptions& opts) {
  return max_abs(fokker_planck_residual_field(drifts, density, params, direction, opts));
}

std::vector<double> kinematical_residual_field(const VelocityFields& vel,
                                               const PhysicalParams& params,
                                               const ResidualOptions& opts_in) {
  const ResidualOptions opts = with_defaults(opts_in, params);
  const DiffMethod method =
      resolve_method(opts.method, {&vel.v, &vel.v_tilde, &vel.u, &vel.u_tilde});
  const double k = 0.5 * params.hbar / params.m;

  if (method == DiffMethod::ClosedForm) {
    FieldEval v{&vel.v, opts.fd_first, opts.fd_second};
    FieldEval vt{&vel.v_tilde, opts.fd_first, opts.fd_second};
    FieldEval u{&vel.u, opts.fd_first, opts.fd_second};
    FieldEval ut{&vel.u_tilde, opts.fd_first, opts.fd_second};
    return interior_map(opts.grid, opts.margin, [&](int, int, double x, double y) {
      const double product_dx = u.dx(x, y) * v.value(x, y) + u.value(x, y) * v.dx(x, y) +
                                ut.dx(x, y) * vt.value(x, y) + ut.value(x, y) * vt.dx(x, y);
      return -k * (v.dxx(x, y) - v.dxtxt(x, y)) - product_dx;
    });
  }

  const NodeFn vn = node_fn(vel.v, opts.grid);
  const NodeFn vtn = node_fn(vel.v_tilde, opts.grid);
  const NodeFn un = node_fn(vel.u, opts.grid);
  const NodeFn utn = node_fn(vel.u_tilde, opts.grid);
  const double h = opts.grid.spacing;
  auto product = [&](int i, int j) { return un(i, j) * vn(i, j) + utn(i, j) * vtn(i, j); };
  return interior_map(opts.grid, stencil_margin(opts), [&](int i, int j, double, double) {
    const double lap_x = (vn(i + 1, j) - 2.0 * vn(i, j) + vn(i - 1, j)) / (h * h);
    const double lap_t = (vn(i, j + 1) - 2.0 * vn(i, j) + vn(i, j - 1)) / (h * h);
    const double product_dx = (product(i + 1, j) - product(i - 1, j)) / (2.0 * h);
    return -k * (lap_x - lap_t) - product_dx;
  });
}

double kinematical_residual(const VelocityFields& vel, const PhysicalParams& params,
                            const ResidualOptions& opts) {
  return max_abs(kinematical_residual_field(vel, params, opts));
}

std::vector<double> dynamical_residual_field(const VelocityFields& vel, const Potential1D& potential,
                                             const PhysicalParams& params,
                                             const ResidualOptions& opts_in) {
  const ResidualOptions opts = with_defaults(opts_in, params);
  const DiffMethod method =
      resolve_method(opts.method, {&vel.v, &vel.v_tilde, &vel.u, &vel.u_tilde});
  const double k = 0.5 * params.hbar / params.m;

  if (method == DiffMethod::ClosedForm) {
    FieldEval v{&vel.v, opts.fd_first, opts.fd_second};
    FieldEval vt{&vel.v_tilde, opts.fd_first, opts.fd_second};
    FieldEval u{&vel.u, opts.fd_first, opts.fd_second};
    FieldEval ut{&vel.u_tilde, opts.fd_first, opts.fd_second};
    return interior_map(opts.grid, opts.margin, [&](int, int, double x, double y) {
      const double convective_u = u.value(x, y) * u.dx(x, y) - ut.value(x, y) * u.dxt(x, y);
      const double convective_v = v.value(x, y) * v.dx(x, y) + vt.value(x, y) * v.dxt(x, y);
      return k * (u.dxx(x, y) - u.dxtxt(x, y)) + convective_u - convective_v -
             potential.deriv(x) / params.m;
    });
  }

  const NodeFn vn = node_fn(vel.v, opts.grid);
  const NodeFn vtn = node_fn(vel.v_tilde, opts.grid);
  const NodeFn un = node_fn(vel.u, opts.grid);
  const NodeFn utn = node_fn(vel.u_tilde, opts.grid);
  const GridSpec& g = opts.grid;
  const double h = g.spacing;
  auto potential_gap = [&](int i, int j) { return potential.value(g.coord(i)) - potential.value(g.coord(j)); };
  return interior_map(opts.grid, stencil_margin(opts), [&](int i, int j, double, double) {
    const double lap_x = (un(i + 1, j) - 2.0 * un(i, j) + un(i - 1, j)) / (h * h);
    const double lap_t = (un(i, j + 1) - 2.0 * un(i, j) + un(i, j - 1)) / (h * h);
    const double u_dx = (un(i + 1, j) - un(i - 1, j)) / (2.0 * h);
    const double u_dxt = (un(i, j + 1) - un(i, j - 1)) / (2.0 * h);
    const double v_dx = (vn(i + 1, j) - vn(i - 1, j)) / (2.0 * h);
    const double v_dxt = (vn(i, j + 1) - vn(i, j - 1)) / (2.0 * h);
    const double potential_dx = (potential_gap(i + 1, j) - potential_gap(i - 1, j)) / (2.0 * h);
    return k * (lap_x - lap_t) + un(i, j) * u_dx - utn(i, j) * u_dxt - vn(i, j) * v_dx -
           vtn(i, j) * v_dxt - potential_dx / params.m;
  });
}

double dynamical_residual(const VelocityFields& vel, const Potential1D& potential,
                          const PhysicalParams& params, const ResidualOptions& opts) {
  return max_abs(dynamical_residual_field(vel, potential, params, opts));
}

TestFunction2D TestFunction2D::coordinate_x() {
  return {"x",
          [](double x, double) { return x; },
          [](double, double) { return 1.0; },
          [](double, double) { return 0.0; },
          [](double, double) { return 0.0; },
          [](double, double) { return 0.0; }};
}

TestFunction2D TestFunction2D::x_squared() {
  return {"x^2",
          [](double x, double) { return x * x; },
          [](double x, double) { return 2.0 * x; },
          [](double, double) { return 0.0; },
          [](double, double) { return 2.0; },
          [](double, double) { return 0.0; }};
}

TestFunction2D TestFunction2D::cross_xxt() {
  return {"x*x~",
          [](double x, double y) { return x * y; },
          [](double, double y) { return y; },
          [](double x, double) { return x; },
          [](double, double) { return 0.0; },
          [](double, double) { return 0.0; }};
}

TestFunction2D TestFunction2D::xt_squared() {
  return {"x~^2",
          [](double, double y) { return y * y; },
          [](double, double) { return 0.0; },
          [](double, double y) { return 2.0 * y; },
          [](double, double) { return 0.0; },
          [](double, double) { return 2.0; }};
}

TestFunction2D TestFunction2D::constant(double c) {
  return {"const",
          [c](double, double) { return c; },
          [](double, double) { return 0.0; },
          [](double, double) { return 0.0; },
          [](double, double) { return 0.0; },
          [](double, double) { return 0.0; }};
}

MeanDerivativeReport mean_derivative_check(const Ensemble& ensemble, const TestFunction2D& f,
                                           const DriftSet& drifts, const PhysicalParams& params,
                                           const MeanDerivativeOptions& opts) {
  if (ensemble.dumped.empty()) {
    throw std::invalid_argument("mean_derivative_check needs dumped paths (set dump_paths > 0)");
  }
  if (ensemble.config.dump_stride != 1) {
    throw std::invalid_argument("mean_derivative_check needs dump_stride == 1");
  }
  if (ensemble.config.group != GroupMode::Forward) {
    throw std::invalid_argument("mean_derivative_check expects forward-group paths");
  }

  const EquilibriumSolution eq(params);
  const double sd = std::sqrt(eq.stationary_covariance().var_x);
  const double cell_width = opts.cell_width > 0.0 ? opts.cell_width : 0.25 * sd;
  const double extent = opts.extent_sd * sd;
  const int cells = std::max(1, static_cast<int>(std::floor(2.0 * extent / cell_width)));
  const double lo = -0.5 * cells * cell_width;
  const double dt = ensemble.config.dt;

  struct CellAcc {
    std::int64_t n = 0;
    double sum = 0.0, sum_sq = 0.0;
  };
  std::vector<CellAcc> acc(static_cast<std::size_t>(cells) * cells);

  for (const Path& path : ensemble.dumped) {
    const auto& s = path.samples;
    for (std::size_t k = 1; k + 1 < s.size(); ++k) {
      const double x = s[k].x, xt = s[k].x_tilde;
      const int ci = static_cast<int>(std::floor((x - lo) / cell_width));
      const int cj = static_cast<int>(std::floor((xt - lo) / cell_width));
      if (ci < 0 || ci >= cells || cj < 0 || cj >= cells) continue;
      const double increment =
          (f.value(s[k + 1].x, xt) - f.value(x, s[k - 1].x_tilde)) / dt;
      CellAcc& cell = acc[static_cast<std::size_t>(ci) * cells + cj];
      cell.n += 1;
      cell.sum += increment;
      cell.sum_sq += increment * increment;
    }
  }

  const double k_diff = 0.5 * params.hbar / params.m;
  MeanDerivativeReport report;
  for (int ci = 0; ci < cells; ++ci) {
    for (int cj = 0; cj < cells; ++cj) {
      const CellAcc& cell = acc[static_cast<std::size_t>(ci) * cells + cj];
      if (cell.n < opts.min_cell_samples) continue;
      const double cx = lo + (ci + 0.5) * cell_width;
      const double cxt = lo + (cj + 0.5) * cell_width;
      const double empirical = cell.sum / cell.n;
      const double variance = std::max(0.0, cell.sum_sq / cell.n - empirical * empirical);
      const double se = std::sqrt(variance / cell.n);
      const double analytic = drifts.b(cx, cxt, 0.0) * f.dx(cx, cxt) +
                              drifts.b_tilde_star(cx, cxt, 0.0) * f.dxt(cx, cxt) +
                              k_diff * (f.dxx(cx, cxt) - f.dxtxt(cx, cxt));
      const double error = std::abs(empirical - analytic);
      report.cells_used += 1;
      report.samples_used += cell.n;
      if (error > report.worst_abs_error) {
        report.worst_abs_error = error;
        report.empirical = empirical;
        report.analytic = analytic;
        report.standard_error = se;
        report.cell_x = cx;
        report.cell_xt = cxt;
      }
    }
  }
  if (report.cells_used == 0) {
    throw std::runtime_error("insufficient samples per cell (<" +
                             std::to_string(opts.min_cell_samples) + ")");
  }
  return report;
}

}  // namespace ntfd
