#include "nelson_tfd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ntfd {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Accumulated sums for one scalar series plus the cross term with another.
struct PairSums {
  std::int64_t n = 0;
  double sa = 0.0, sb = 0.0;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
};

double variance_from_sums(double s1, double s2, double n) {
  if (n < 2) throw std::invalid_argument("need at least 2 samples for a variance");
  return (s2 - s1 * s1 / n) / (n - 1.0);
}

double covariance_from_sums(double sa, double sb, double sab, double n) {
  return (sab - sa * sb / n) / (n - 1.0);
}

// Jackknife standard error of a statistic computed from leave-one-out sums.
// estimator(i) must return the statistic with sample i removed.
template <class LeaveOneOut>
double jackknife_se(std::int64_t n, const LeaveOneOut& estimator) {
  if (n < 3) return kNan;
  double mean = 0.0;
  for (std::int64_t i = 0; i < n; ++i) mean += estimator(i);
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = estimator(i) - mean;
    ss += d * d;
  }
  return std::sqrt(ss * (n - 1.0) / n);
}

}  // namespace

Histogram::Histogram(int bins, double lo, double hi, Mode mode)
    : lo_(lo), hi_(hi), mode_(mode) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least 1 bin");
  if (!(hi > lo)) throw std::invalid_argument("empty histogram range");
  width_ = (hi - lo) / bins;
  counts_.assign(bins, 0);
}

void Histogram::add(double value) {
  if (value < lo_) {
    ++underflow_;
    return;
  }
  if (value >= hi_) {
    // the top edge itself belongs to the last bin
    if (value == hi_) {
      ++counts_.back();
    } else {
      ++overflow_;
    }
    return;
  }
  int bin = static_cast<int>((value - lo_) / width_);
  bin = std::min(bin, bins() - 1);
  ++counts_[bin];
}

void Histogram::merge(const Histogram& other) {
  if (other.bins() != bins() || other.lo_ != lo_ || other.hi_ != hi_) {
    throw std::invalid_argument("cannot merge histograms with different edges");
  }
  for (int i = 0; i < bins(); ++i) counts_[i] += other.counts_[i];
  underflow_ += other.underflow_;
  overflow_ += other.overflow_;
}

std::uint64_t Histogram::in_range() const {
  std::uint64_t sum = 0;
  for (std::uint64_t c : counts_) sum += c;
  return sum;
}

double Histogram::density(int i) const {
  const std::uint64_t n = in_range();
  if (n == 0) return 0.0;
  return static_cast<double>(counts_[i]) / (static_cast<double>(n) * width_);
}

Histogram marginal_histogram(const Ensemble& ensemble, Coordinate coordinate, int bins, double lo,
                             double hi, SampleSlice slice) {
  if (bins < 2) throw std::invalid_argument("marginal_histogram needs at least 2 bins");
  if (!(hi > lo)) throw std::invalid_argument("empty histogram range");
  if (ensemble.final_points.empty()) throw std::invalid_argument("empty ensemble");

  Histogram hist(bins, lo, hi);
  auto pick = [coordinate](const ThermalPoint& p) {
    return coordinate == Coordinate::X ? p.x : p.x_tilde;
  };
  if (slice == SampleSlice::Final) {
    for (const ThermalPoint& p : ensemble.final_points) hist.add(pick(p));
  } else {
    if (ensemble.dumped.empty()) {
      throw std::invalid_argument("pooled histogram needs dumped paths (set dump_paths > 0)");
    }
    for (const Path& path : ensemble.dumped) {
      for (const ThermalPoint& p : path.samples) hist.add(pick(p));
    }
  }
  return hist;
}

MomentEstimates moment_estimates(const Ensemble& ensemble, SampleSlice slice) {
  const std::int64_t n_paths = static_cast<std::int64_t>(ensemble.final_points.size());
  if (n_paths < 2) throw std::invalid_argument("moment_estimates needs at least 2 paths");

  MomentEstimates out;
  out.n = n_paths;

  if (slice == SampleSlice::Final) {
    PairSums s;
    for (const ThermalPoint& p : ensemble.final_points) {
      s.n += 1;
      s.sa += p.x;
      s.sb += p.x_tilde;
      s.saa += p.x * p.x;
      s.sbb += p.x_tilde * p.x_tilde;
      s.sab += p.x * p.x_tilde;
    }
    const double n = static_cast<double>(s.n);
    out.samples = s.n;
    out.mean_x = s.sa / n;
    out.mean_xt = s.sb / n;
    out.var_x = variance_from_sums(s.sa, s.saa, n);
    out.var_xt = variance_from_sums(s.sb, s.sbb, n);
    out.cov_xxt = covariance_from_sums(s.sa, s.sb, s.sab, n);
    out.se_mean_x = std::sqrt(std::max(0.0, out.var_x) / n);
    out.se_mean_xt = std::sqrt(std::max(0.0, out.var_xt) / n);

    const auto& pts = ensemble.final_points;
    out.se_var_x = jackknife_se(s.n, [&](std::int64_t i) {
      const double a = pts[i].x;
      return variance_from_sums(s.sa - a, s.saa - a * a, n - 1.0);
    });
    out.se_var_xt = jackknife_se(s.n, [&](std::int64_t i) {
      const double b = pts[i].x_tilde;
      return variance_from_sums(s.sb - b, s.sbb - b * b, n - 1.0);
    });
    out.se_cov_xxt = jackknife_se(s.n, [&](std::int64_t i) {
      const double a = pts[i].x, b = pts[i].x_tilde;
      return covariance_from_sums(s.sa - a, s.sb - b, s.sab - a * b, n - 1.0);
    });
    return out;
  }

  // Pooled over time: per-path sums allow jackknife over paths.
  PathSums total;
  for (const PathSums& p : ensemble.path_sums) {
    total.n += p.n;
    total.sx += p.sx;
    total.sxt += p.sxt;
    total.sxx += p.sxx;
    total.sxtxt += p.sxtxt;
    total.sxxt += p.sxxt;
  }
  const double n = static_cast<double>(total.n);
  out.samples = total.n;
  out.mean_x = total.sx / n;
  out.mean_xt = total.sxt / n;
  out.var_x = variance_from_sums(total.sx, total.sxx, n);
  out.var_xt = variance_from_sums(total.sxt, total.sxtxt, n);
  out.cov_xxt = covariance_from_sums(total.sx, total.sxt, total.sxxt, n);

  const auto& ps = ensemble.path_sums;
  out.se_mean_x = jackknife_se(n_paths, [&](std::int64_t i) {
    return (total.sx - ps[i].sx) / static_cast<double>(total.n - ps[i].n);
  });
  out.se_mean_xt = jackknife_se(n_paths, [&](std::int64_t i) {
    return (total.sxt - ps[i].sxt) / static_cast<double>(total.n - ps[i].n);
  });
  out.se_var_x = jackknife_se(n_paths, [&](std::int64_t i) {
    return variance_from_sums(total.sx - ps[i].sx, total.sxx - ps[i].sxx,
                              static_cast<double>(total.n - ps[i].n));
  });
  out.se_var_xt = jackknife_se(n_paths, [&](std::int64_t i) {
    return variance_from_sums(total.sxt - ps[i].sxt, total.sxtxt - ps[i].sxtxt,
                              static_cast<double>(total.n - ps[i].n));
  });
  out.se_cov_xxt = jackknife_se(n_paths, [&](std::int64_t i) {
    return covariance_from_sums(total.sx - ps[i].sx, total.sxt - ps[i].sxt,
                                total.sxxt - ps[i].sxxt, static_cast<double>(total.n - ps[i].n));
  });
  return out;
}

UncertaintyReport uncertainty_estimate(const Ensemble& ensemble, const DriftSet& drifts,
                                       const PhysicalParams& params, SampleSlice slice) {
  const std::int64_t n_paths = static_cast<std::int64_t>(ensemble.final_points.size());
  if (n_paths < 2) throw std::invalid_argument("uncertainty_estimate needs at least 2 paths");

  UncertaintyReport report;
  report.n = n_paths;
  report.n_occupation = thermal_occupation(params);
  report.analytic_product = 0.5 * params.hbar + params.hbar * report.n_occupation;

  double sx = 0.0, sxx = 0.0, sw = 0.0, sww = 0.0;
  std::vector<double> xs, ws;
  std::vector<std::int64_t> counts;  // pooled: per-path sample counts
  std::vector<double> psx, psxx, psw, psww;

  if (slice == SampleSlice::Final) {
    xs.reserve(n_paths);
    ws.reserve(n_paths);
    for (const ThermalPoint& p : ensemble.final_points) {
      const double w =
          0.5 * params.m * (drifts.b(p.x, p.x_tilde, p.t) - drifts.b_star(p.x, p.x_tilde, p.t));
      xs.push_back(p.x);
      ws.push_back(w);
      sx += p.x;
      sxx += p.x * p.x;
      sw += w;
      sww += w * w;
    }
  } else {
    for (const PathSums& p : ensemble.path_sums) {
      counts.push_back(p.n);
      psx.push_back(p.sx);
      psxx.push_back(p.sxx);
      psw.push_back(p.sw);
      psww.push_back(p.sww);
      sx += p.sx;
      sxx += p.sxx;
      sw += p.sw;
      sww += p.sww;
    }
  }

  const double n = slice == SampleSlice::Final
                       ? static_cast<double>(n_paths)
                       : [&] {
                           std::int64_t total = 0;
                           for (std::int64_t c : counts) total += c;
                           return static_cast<double>(total);
                         }();

  const double var_x = variance_from_sums(sx, sxx, n);
  const double var_w = variance_from_sums(sw, sww, n);
  report.std_x = std::sqrt(std::max(0.0, var_x));
  report.std_halfdiff_p = std::sqrt(std::max(0.0, var_w));
  report.product = report.std_x * report.std_halfdiff_p;

  auto leave_out_stats = [&](std::int64_t i) {
    double lx, lxx, lw, lww, ln;
    if (slice == SampleSlice::Final) {
      lx = sx - xs[i];
      lxx = sxx - xs[i] * xs[i];
      lw = sw - ws[i];
      lww = sww - ws[i] * ws[i];
      ln = n - 1.0;
    } else {
      lx = sx - psx[i];
      lxx = sxx - psxx[i];
      lw = sw - psw[i];
      lww = sww - psww[i];
      ln = n - static_cast<double>(counts[i]);
    }
    struct {
      double sd_x, sd_w;
    } r{std::sqrt(std::max(0.0, variance_from_sums(lx, lxx, ln))),
        std::sqrt(std::max(0.0, variance_from_sums(lw, lww, ln)))};
    return r;
  };

  report.se_std_x = jackknife_se(n_paths, [&](std::int64_t i) { return leave_out_stats(i).sd_x; });
  report.se_std_halfdiff_p =
      jackknife_se(n_paths, [&](std::int64_t i) { return leave_out_stats(i).sd_w; });
  report.se_product = jackknife_se(n_paths, [&](std::int64_t i) {
    const auto s = leave_out_stats(i);
    return s.sd_x * s.sd_w;
  });
  return report;
}

AnalyticDistribution gaussian_distribution(double mean, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian variance must be positive");
  const double sd = std::sqrt(variance);
  const double norm = 1.0 / (sd * std::sqrt(2.0 * M_PI));
  return {[mean, sd, norm](double x) {
            const double z = (x - mean) / sd;
            return norm * std::exp(-0.5 * z * z);
          },
          [mean, sd](double x) { return 0.5 * std::erfc(-(x - mean) / (sd * M_SQRT2)); }};
}

ChiSquareResult distribution_test(const Histogram& histogram, const AnalyticDistribution& dist,
                                  double min_expected) {
  const double total = static_cast<double>(histogram.total());
  if (total <= 0.0) throw std::invalid_argument("empty histogram");

  // Full partition of the line: (-inf, e0), the bins, [eB, inf).
  std::vector<double> observed, expected;
  observed.push_back(static_cast<double>(histogram.underflow()));
  expected.push_back(total * dist.cdf(histogram.edge(0)));
  for (int i = 0; i < histogram.bins(); ++i) {
    observed.push_back(static_cast<double>(histogram.count(i)));
    expected.push_back(total * (dist.cdf(histogram.edge(i + 1)) - dist.cdf(histogram.edge(i))));
  }
  observed.push_back(static_cast<double>(histogram.overflow()));
  expected.push_back(total * (1.0 - dist.cdf(histogram.edge(histogram.bins()))));

  // Greedy adjacent merge until every retained cell has enough expectation.
  std::vector<double> obs_cells, exp_cells;
  double acc_obs = 0.0, acc_exp = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    acc_obs += observed[i];
    acc_exp += expected[i];
    if (acc_exp >= min_expected) {
      obs_cells.push_back(acc_obs);
      exp_cells.push_back(acc_exp);
      acc_obs = 0.0;
      acc_exp = 0.0;
    }
  }
  if (acc_exp > 0.0 || acc_obs > 0.0) {
    if (obs_cells.empty()) throw std::runtime_error("chi-square degenerate: no cells after tail merge");
    obs_cells.back() += acc_obs;
    exp_cells.back() += acc_exp;
  }
  if (obs_cells.size() < 2) {
    throw std::runtime_error("chi-square degenerate: fewer than 2 cells after tail merge");
  }

  ChiSquareResult result;
  result.cells = static_cast<int>(obs_cells.size());
  result.dof = result.cells - 1;
  for (std::size_t i = 0; i < obs_cells.size(); ++i) {
    const double d = obs_cells[i] - exp_cells[i];
    result.statistic += d * d / exp_cells[i];
  }
  result.p_value = gamma_q(0.5 * result.dof, 0.5 * result.statistic);
  return result;
}

namespace {

// Lower regularized incomplete gamma by series (x < a + 1).
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma by continued fraction (x >= a + 1),
// modified Lentz.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_q needs a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

}  // namespace ntfd
