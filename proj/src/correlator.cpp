#include "homlab/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "homlab/errors.hpp"

namespace homlab {

namespace {

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

// Normalized correlation of the resample idx; nullopt when a port is dark.
std::optional<double> resampled_correlation(const EnsembleRecord& record,
                                            std::span<const std::size_t> idx,
                                            std::vector<double>& plus, std::vector<double>& minus,
                                            std::vector<double>& prod) {
  const std::size_t n = idx.size();
  for (std::size_t i = 0; i < n; ++i) {
    plus[i] = record.i_plus[idx[i]];
    minus[i] = record.i_minus[idx[i]];
    prod[i] = plus[i] * minus[i];
  }
  const double mp = stats::pairwise_sum(plus);
  const double mm = stats::pairwise_sum(minus);
  if (!(mp > 0.0) || !(mm > 0.0)) return std::nullopt;
  return stats::pairwise_sum(prod) * static_cast<double>(n) / (mp * mm);
}

double weighted_mean(std::span<const double> x, std::span<const double> w) {
  if (w.empty()) return stats::mean(x);
  std::vector<double> prod(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) prod[i] = x[i] * w[i];
  return stats::pairwise_sum(prod) / stats::pairwise_sum(w);
}

}  // namespace

double integrated_intensity(const SampledSignal& signal, const TimeGrid& window,
                            const IntensityOptions& opts) {
  if (!(window.t_end > window.t_start)) throw DomainError("integration window is empty");
  const double slack = 1e-9 * signal.dt();
  if (window.t_start < signal.t_start() - slack || window.t_end > signal.t_end() + slack)
    throw DomainError("integration window extends beyond the signal");

  std::vector<double> y;
  if (signal.representation() == Representation::real_voltage &&
      opts.carrier_average_cutoff > 0.0) {
    std::vector<cplx> sq(signal.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::norm(signal[i]);
    const SampledSignal smooth =
        low_pass(SampledSignal(Representation::real_voltage, signal.t_start(), signal.dt(),
                               std::move(sq)),
                 opts.carrier_average_cutoff);
    y.resize(smooth.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = smooth[i].real();
  } else {
    y = signal.intensity();
  }

  const double last = static_cast<double>(y.size() - 1);
  const double a = std::clamp(snap((window.t_start - signal.t_start()) / signal.dt()), 0.0, last);
  const double b = std::clamp(snap((window.t_end - signal.t_start()) / signal.dt()), 0.0, last);
  auto at = [&](double x) {
    const auto i = static_cast<std::size_t>(std::floor(x));
    if (i + 1 >= y.size()) return y.back();
    const double f = x - static_cast<double>(i);
    return y[i] + f * (y[i + 1] - y[i]);
  };

  const double dt = signal.dt();
  const double i0 = std::ceil(a);
  const double i1 = std::floor(b);
  if (i0 > i1) return 0.5 * (b - a) * dt * (at(a) + at(b));

  const auto k0 = static_cast<std::size_t>(i0);
  const auto k1 = static_cast<std::size_t>(i1);
  double total = 0.0;
  if (k1 > k0) {
    const std::span<const double> mid(y.data() + k0, k1 - k0 + 1);
    total = dt * (stats::pairwise_sum(mid) - 0.5 * (y[k0] + y[k1]));
  }
  total += 0.5 * (i0 - a) * dt * (at(a) + y[k0]);
  total += 0.5 * (b - i1) * dt * (y[k1] + at(b));
  return total;
}

void EnsembleRecord::validate() const {
  if (i_plus.size() != i_minus.size())
    throw ShapeError("ensemble record has unequal I+ and I- counts");
  if (!weights.empty() && weights.size() != i_plus.size())
    throw ShapeError("ensemble weights do not match the sample count");
  const std::size_t needed = weights.empty() ? 2 : 1;
  if (i_plus.size() < needed) throw PreconditionError("ensemble needs at least two samples");
  auto negative = [](double v) { return !(v >= 0.0); };
  if (std::any_of(i_plus.begin(), i_plus.end(), negative) ||
      std::any_of(i_minus.begin(), i_minus.end(), negative))
    throw DomainError("integrated intensities must be non-negative");
  if (std::any_of(weights.begin(), weights.end(), negative))
    throw DomainError("ensemble weights must be non-negative");
  if (!weights.empty() && !(stats::pairwise_sum(weights) > 0.0))
    throw DomainError("ensemble weights sum to zero");
}

double raw_cross_correlation(const EnsembleRecord& record) {
  record.validate();
  std::vector<double> prod(record.sample_count());
  for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = record.i_plus[i] * record.i_minus[i];
  return weighted_mean(prod, record.weights);
}

double cross_correlation(const EnsembleRecord& record) {
  const double numerator = raw_cross_correlation(record);
  const double mean_plus = weighted_mean(record.i_plus, record.weights);
  const double mean_minus = weighted_mean(record.i_minus, record.weights);
  if (!(mean_plus > 0.0) || !(mean_minus > 0.0))
    throw NormalizationError("cross correlation undefined: a port has zero mean intensity");
  return numerator / (mean_plus * mean_minus);
}

stats::BootstrapResult cross_correlation_bootstrap(const EnsembleRecord& record,
                                                   std::size_t n_resamples, double level,
                                                   stats::RandomStream stream) {
  record.validate();
  if (!record.weights.empty())
    throw PreconditionError("bootstrap needs an equally weighted random ensemble");
  const std::size_t n = record.sample_count();
  std::vector<double> prod(n), plus(n), minus(n);
  const double estimate = cross_correlation(record);
  auto statistic = [&](std::span<const std::size_t> idx) {
    // A resample that misses every bright sample of a port leaves C
    // undefined; it contributes delta = 0.
    return resampled_correlation(record, idx, plus, minus, prod).value_or(estimate);
  };
  auto result = stats::bootstrap_statistic(n, statistic, n_resamples, level, stream);
  result.estimate = estimate;
  return result;
}

double dip_visibility(double c_zero, double c_far) {
  if (!(c_far > 0.0)) throw NormalizationError("dip visibility needs C(inf) > 0");
  return 1.0 - c_zero / c_far;
}

stats::BootstrapResult dip_visibility_bootstrap(const EnsembleRecord& zero,
                                                std::span<const EnsembleRecord> far,
                                                std::size_t n_resamples, double level,
                                                stats::RandomStream stream) {
  if (far.empty()) throw DomainError("visibility bootstrap needs at least one far-delay record");
  if (n_resamples < 100) throw DomainError("bootstrap needs at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  std::vector<const EnsembleRecord*> records{&zero};
  for (const auto& r : far) records.push_back(&r);
  for (const auto* r : records) {
    r->validate();
    if (!r->weights.empty())
      throw PreconditionError("bootstrap needs equally weighted random ensembles");
  }

  auto visibility_of = [&](std::span<const double> c) {
    double c_far = 0.0;
    for (std::size_t k = 1; k < c.size(); ++k) c_far += c[k];
    return dip_visibility(c[0], c_far / static_cast<double>(c.size() - 1));
  };
  std::vector<double> c(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) c[k] = cross_correlation(*records[k]);
  const double estimate = visibility_of(c);
  const std::vector<double> c_orig = c;

  std::vector<double> deltas(n_resamples);
  std::vector<std::size_t> idx;
  std::vector<double> plus, minus, prod;
  for (std::size_t r = 0; r < n_resamples; ++r) {
    for (std::size_t k = 0; k < records.size(); ++k) {
      const std::size_t n = records[k]->sample_count();
      idx.resize(n);
      plus.resize(n);
      minus.resize(n);
      prod.resize(n);
      CounterRng rng(stream.seed, mix64(stream.stream + k), r);
      for (auto& i : idx) i = rng.index(n);
      c[k] = resampled_correlation(*records[k], idx, plus, minus, prod).value_or(c_orig[k]);
    }
    deltas[r] = visibility_of(c) - estimate;
  }
  const auto spread = stats::SampleSummary::of(deltas);
  std::sort(deltas.begin(), deltas.end());
  const double lo = stats::percentile(deltas, 0.5 * (1.0 - level)) + estimate;
  const double hi = stats::percentile(deltas, 0.5 * (1.0 + level)) + estimate;
  return {estimate, {std::min(lo, hi), std::max(lo, hi), level}, spread.std_dev};
}

double analytic_visibility(const PhaseDistribution& dist) {
  if (std::abs(dist.mean_cos()) > 1e-9)
    throw PreconditionError(
        "phase law has E[cos phi] != 0; second-order interference would survive the average");
  return dist.mean_cos_squared();
}

double mismatch_visibility(double visibility, double amplitude_ratio) {
  if (!(amplitude_ratio > 0.0)) throw DomainError("amplitude ratio must be > 0");
  const double f = 2.0 * amplitude_ratio / (1.0 + amplitude_ratio * amplitude_ratio);
  return visibility * f * f;
}

double analytic_classical_dip(double tau, double envelope_sigma, const PhaseDistribution& dist,
                              double amplitude_ratio) {
  if (!(envelope_sigma > 0.0)) throw DomainError("envelope sigma must be > 0");
  const double v = mismatch_visibility(analytic_visibility(dist), amplitude_ratio);
  // Overlap ratio exp(-tau^2 / (4 sigma^2)), squared.
  return 1.0 - v * std::exp(-tau * tau / (2.0 * envelope_sigma * envelope_sigma));
}

void DipCurve::validate() const {
  if (points.empty()) throw DomainError("dip curve is empty");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.ci_lo <= p.c_mean && p.c_mean <= p.ci_hi))
      throw DomainError("dip curve point violates ci_lo <= c_mean <= ci_hi");
    if (i > 0 && !(points[i - 1].tau < p.tau))
      throw DomainError("dip curve delays must be strictly increasing");
  }
}

double DipCurve::far_reference() const {
  if (points.empty()) throw DomainError("dip curve is empty");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(points[a].tau) > std::abs(points[b].tau);
  });
  const std::size_t k = std::min<std::size_t>(3, order.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += points[order[i]].c_mean;
  return acc / static_cast<double>(k);
}

const DipPoint& DipCurve::zero_delay_point() const {
  if (points.empty()) throw DomainError("dip curve is empty");
  return *std::min_element(points.begin(), points.end(), [](const DipPoint& a, const DipPoint& b) {
    return std::abs(a.tau) < std::abs(b.tau);
  });
}

double DipCurve::visibility() const {
  return dip_visibility(zero_delay_point().c_mean, far_reference());
}

void DipCurve::write_csv(std::ostream& os) const {
  std::ostringstream buf;
  buf.precision(17);
  buf << "tau_s,c_mean,ci_lo,ci_hi\n";
  for (const auto& p : points)
    buf << p.tau << ',' << p.c_mean << ',' << p.ci_lo << ',' << p.ci_hi << '\n';
  os << buf.str();
}

DipCurve DipCurve::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DomainError("dip curve CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "tau_s,c_mean,ci_lo,ci_hi")
    throw DomainError("dip curve CSV header must be tau_s,c_mean,ci_lo,ci_hi");
  DipCurve curve;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    DipPoint p;
    if (!(fields >> p.tau >> p.c_mean >> p.ci_lo >> p.ci_hi))
      throw DomainError("malformed dip curve CSV row " + std::to_string(lineno));
    curve.points.push_back(p);
  }
  curve.validate();
  return curve;
}

std::string to_string(CurveNormalization n) {
  switch (n) {
    case CurveNormalization::classical:
      return "classical";
    case CurveNormalization::quantum_probability:
      return "quantum_probability";
    case CurveNormalization::counts:
      return "counts";
  }
  return "unknown";
}

}  // namespace homlab
