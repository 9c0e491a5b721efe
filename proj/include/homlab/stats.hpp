#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace homlab::stats {

/// Mean, sample standard deviation (n - 1 divisor) and count.
struct SampleSummary {
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t count = 0;

  static SampleSummary of(std::span<const double> data);
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;

  bool contains(double x) const { return lo <= x && x <= hi; }
  double half_width() const { return 0.5 * (hi - lo); }
};

/// Identifies a family of counter-based random streams.
struct RandomStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Fixed-order pairwise summation; the result does not depend on threading.
double pairwise_sum(std::span<const double> values);
double mean(std::span<const double> values);

/// Percentile by linear interpolation between order statistics, inclusive
/// method: h = (n - 1) p, x[floor h] + frac(h) (x[floor h + 1] - x[floor h]).
/// `sorted` must be ascending.
double percentile(std::span<const double> sorted, double p);

/// Smallest N with z sigma / sqrt(N) <= rel_halfwidth mu, i.e.
/// ceil((z sigma / (rel_halfwidth mu))^2), never below 2.
std::size_t min_samples(const SampleSummary& summary, double rel_halfwidth = 0.05,
                        double z = 1.96);

/// Percentile bootstrap of a generic statistic.
///
/// `statistic` receives the resampled indices (size n, drawn with
/// replacement) and returns the statistic of that resample.
struct BootstrapResult {
  double estimate = 0.0;    // statistic on the original sample
  ConfidenceInterval ci;
  double std_error = 0.0;   // standard deviation of the resampled statistics
};

using IndexStatistic = std::function<double(std::span<const std::size_t>)>;

BootstrapResult bootstrap_statistic(std::size_t n, const IndexStatistic& statistic,
                                    std::size_t n_resamples, double level,
                                    RandomStream stream);

/// Percentile bootstrap CI of the mean: with delta = mean* - mean, returns
/// [delta_(1-level)/2 + mean, delta_(1+level)/2 + mean].
ConfidenceInterval bootstrap_ci(std::span<const double> sample, std::size_t n_resamples = 10000,
                                double level = 0.95, RandomStream stream = {});

}  // namespace homlab::stats
