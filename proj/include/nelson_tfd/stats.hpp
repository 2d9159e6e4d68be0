#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nelson_tfd/drift.hpp"
#include "nelson_tfd/params.hpp"
#include "nelson_tfd/sde.hpp"

namespace ntfd {

/// Uniform-bin histogram with explicit out-of-range tallies.
class Histogram {
 public:
  enum class Mode { Counts, Density };

  Histogram(int bins, double lo, double hi, Mode mode = Mode::Density);

  void add(double value);
  /// Merge counts from a histogram with identical edges.
  void merge(const Histogram& other);

  int bins() const { return static_cast<int>(counts_.size()); }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double width() const { return width_; }
  double edge(int i) const { return lo_ + i * width_; }
  std::uint64_t count(int i) const { return counts_[i]; }
  std::uint64_t underflow() const { return underflow_; }
  std::uint64_t overflow() const { return overflow_; }
  std::uint64_t in_range() const;
  std::uint64_t total() const { return in_range() + underflow_ + overflow_; }
  Mode mode() const { return mode_; }

  /// Normalized density of bin i: count / (in_range * width).
  double density(int i) const;

 private:
  double lo_, hi_, width_;
  Mode mode_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t underflow_ = 0, overflow_ = 0;
};

enum class Coordinate { X, XTilde };

/// Which samples an estimator consumes: the end-of-march slice (default) or
/// all retained path samples pooled over time (flagged in outputs).
enum class SampleSlice { Final, Pooled };

/// Density-normalized marginal histogram of the chosen coordinate.
/// Pooled mode requires dumped paths.
Histogram marginal_histogram(const Ensemble& ensemble, Coordinate coordinate, int bins, double lo,
                             double hi, SampleSlice slice = SampleSlice::Final);

struct MomentEstimates {
  std::int64_t n = 0;          ///< paths contributing
  std::int64_t samples = 0;    ///< total samples (== n for the final slice)
  double mean_x = 0.0, se_mean_x = 0.0;
  double mean_xt = 0.0, se_mean_xt = 0.0;
  double var_x = 0.0, se_var_x = 0.0;
  double var_xt = 0.0, se_var_xt = 0.0;
  double cov_xxt = 0.0, se_cov_xxt = 0.0;
};

/// Unbiased sample moments with jackknife-over-paths standard errors.
/// Requires at least 2 paths; standard errors are NaN below 3 paths.
MomentEstimates moment_estimates(const Ensemble& ensemble, SampleSlice slice = SampleSlice::Final);

struct UncertaintyReport {
  double std_x = 0.0, se_std_x = 0.0;
  double std_halfdiff_p = 0.0, se_std_halfdiff_p = 0.0;
  double product = 0.0, se_product = 0.0;
  double analytic_product = 0.0;  ///< hbar/2 + hbar n
  double n_occupation = 0.0;
  std::int64_t n = 0;
};

/// Empirical uncertainty product sqrt(Var[x]) sqrt(Var[(p-p*)/2]) with
/// (p-p*)/2 = m (b - b*)/2 evaluated pointwise on the sampled points.
UncertaintyReport uncertainty_estimate(const Ensemble& ensemble, const DriftSet& drifts,
                                       const PhysicalParams& params,
                                       SampleSlice slice = SampleSlice::Final);

/// Analytic reference distribution for goodness-of-fit tests.
struct AnalyticDistribution {
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
};
AnalyticDistribution gaussian_distribution(double mean, double variance);

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 0.0;
  int dof = 0;
  int cells = 0;
};

/// Pearson chi-square of the histogram (including out-of-range tallies)
/// against the analytic distribution. Adjacent cells are merged until every
/// retained cell has expected count >= min_expected.
ChiSquareResult distribution_test(const Histogram& histogram, const AnalyticDistribution& dist,
                                  double min_expected = 5.0);

/// Regularized upper incomplete gamma Q(a, x); chi-square tail probability
/// is gamma_q(dof/2, statistic/2).
double gamma_q(double a, double x);

}  // namespace ntfd
