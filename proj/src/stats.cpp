#include "homlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "homlab/errors.hpp"
#include "homlab/random.hpp"

namespace homlab::stats {

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 32;
  if (values.size() <= kBlock) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean of an empty sample");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

SampleSummary SampleSummary::of(std::span<const double> data) {
  if (data.size() < 2) throw DomainError("sample summary needs at least two values");
  const double mu = stats::mean(data);
  std::vector<double> sq(data.size());
  std::transform(data.begin(), data.end(), sq.begin(),
                 [mu](double x) { return (x - mu) * (x - mu); });
  const double var = pairwise_sum(sq) / static_cast<double>(data.size() - 1);
  return {mu, std::sqrt(var), data.size()};
}

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("percentile p must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::size_t min_samples(const SampleSummary& summary, double rel_halfwidth, double z) {
  if (!(summary.mean > 0.0)) throw DomainError("min_samples needs a positive mean");
  if (!(rel_halfwidth > 0.0)) throw DomainError("relative half-width must be > 0");
  if (!(z > 0.0)) throw DomainError("z must be > 0");
  if (!(summary.std_dev >= 0.0)) throw DomainError("standard deviation must be >= 0");
  const double ratio = z * summary.std_dev / (rel_halfwidth * summary.mean);
  const double n = ratio * ratio;
  // Absorb rounding so that an exact integer is not bumped to the next one.
  const double n_ceil = std::ceil(n * (1.0 - 1e-12));
  return std::max<std::size_t>(2, static_cast<std::size_t>(n_ceil));
}

BootstrapResult bootstrap_statistic(std::size_t n, const IndexStatistic& statistic,
                                    std::size_t n_resamples, double level,
                                    RandomStream stream) {
  if (n == 0) throw DomainError("bootstrap of an empty sample");
  if (n < 2) throw DomainError("bootstrap needs at least two values");
  if (n_resamples < 100) throw DomainError("bootstrap needs at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  const double estimate = statistic(idx);

  std::vector<double> deltas(n_resamples);
  for (std::size_t r = 0; r < n_resamples; ++r) {
    CounterRng rng(stream.seed, stream.stream, r);
    for (auto& k : idx) k = rng.index(n);
    deltas[r] = statistic(idx) - estimate;
  }

  const SampleSummary spread = SampleSummary::of(deltas);
  std::sort(deltas.begin(), deltas.end());
  const double lo = percentile(deltas, 0.5 * (1.0 - level)) + estimate;
  const double hi = percentile(deltas, 0.5 * (1.0 + level)) + estimate;
  return {estimate, {std::min(lo, hi), std::max(lo, hi), level}, spread.std_dev};
}

ConfidenceInterval bootstrap_ci(std::span<const double> sample, std::size_t n_resamples,
                                double level, RandomStream stream) {
  if (sample.empty()) throw DomainError("bootstrap of an empty sample");
  std::vector<double> scratch(sample.size());
  auto resampled_mean = [&](std::span<const std::size_t> idx) {
    for (std::size_t i = 0; i < idx.size(); ++i) scratch[i] = sample[idx[i]];
    return pairwise_sum(scratch) / static_cast<double>(scratch.size());
  };
  return bootstrap_statistic(sample.size(), resampled_mean, n_resamples, level, stream).ci;
}

}  // namespace homlab::stats
