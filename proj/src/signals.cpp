#include "homlab/signals.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>

#include "homlab/errors.hpp"

namespace homlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

enum class Direction { forward, backward };

void fft_in_place(std::vector<cplx>& data, Direction dir) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  const int n = static_cast<int>(data.size());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan = fftw_plan_dft_1d(n, buf, buf, dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  if (dir == Direction::backward) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : data) v *= scale;
  }
}

// Signed frequency (Hz) of DFT bin k.
double bin_frequency(std::size_t k, std::size_t n, double dt) {
  const auto kk = static_cast<double>(k);
  const auto nn = static_cast<double>(n);
  const double f = (2 * k <= n) ? kk / (nn * dt) : (kk - nn) / (nn * dt);
  return f;
}

void drop_imaginary(std::vector<cplx>& data) {
  for (auto& v : data) v = {v.real(), 0.0};
}

}  // namespace

void PulseSpec::validate() const {
  if (!(amplitude >= 0.0)) throw DomainError("pulse amplitude must be >= 0");
  if (!(envelope_sigma > 0.0)) throw DomainError("pulse envelope_sigma must be > 0");
  if (!(carrier_freq > 0.0)) throw DomainError("pulse carrier_freq must be > 0");
  if (!std::isfinite(delay) || !std::isfinite(phase))
    throw DomainError("pulse delay and phase must be finite");
}

void TimeGrid::validate() const {
  if (!(dt > 0.0)) throw DomainError("time grid dt must be > 0");
  if (!(t_end > t_start)) throw DomainError("time grid needs t_end > t_start");
  const double n = (t_end - t_start) / dt;
  if (std::abs(n - std::round(n)) > 1e-6 * std::max(1.0, n))
    throw DomainError("time grid span is not an integer number of steps");
}

std::size_t TimeGrid::intervals() const {
  return static_cast<std::size_t>(std::llround((t_end - t_start) / dt));
}

bool TimeGrid::covers(const PulseSpec& pulse, double n_sigma) const {
  const double slack = 1e-9 * dt;
  return t_start <= pulse.delay - n_sigma * pulse.envelope_sigma + slack &&
         t_end >= pulse.delay + n_sigma * pulse.envelope_sigma - slack;
}

TimeGrid TimeGrid::for_pulses(std::span<const PulseSpec> pulses, double dt, double n_sigma) {
  if (pulses.empty()) throw DomainError("for_pulses needs at least one pulse");
  if (!(dt > 0.0)) throw DomainError("time grid dt must be > 0");
  double lo = pulses.front().delay - n_sigma * pulses.front().envelope_sigma;
  double hi = pulses.front().delay + n_sigma * pulses.front().envelope_sigma;
  for (const auto& p : pulses) {
    lo = std::min(lo, p.delay - n_sigma * p.envelope_sigma);
    hi = std::max(hi, p.delay + n_sigma * p.envelope_sigma);
  }
  const double first = std::floor(lo / dt + 1e-9);
  const double last = std::ceil(hi / dt - 1e-9);
  return {first * dt, last * dt, dt};
}

SampledSignal::SampledSignal(Representation rep, double t_start, double dt,
                             std::vector<cplx> samples)
    : rep_(rep), t_start_(t_start), dt_(dt), samples_(std::move(samples)) {
  if (!(dt_ > 0.0)) throw DomainError("signal dt must be > 0");
  if (samples_.size() < 2) throw DomainError("signal needs at least two samples");
}

SampledSignal SampledSignal::zeros(Representation rep, const TimeGrid& grid) {
  grid.validate();
  return {rep, grid.t_start, grid.dt, std::vector<cplx>(grid.size())};
}

std::vector<double> SampledSignal::intensity() const {
  std::vector<double> out(samples_.size());
  std::transform(samples_.begin(), samples_.end(), out.begin(),
                 [](const cplx& v) { return std::norm(v); });
  return out;
}

bool SampledSignal::same_grid(const SampledSignal& other) const {
  return rep_ == other.rep_ && samples_.size() == other.samples_.size() &&
         std::abs(dt_ - other.dt_) <= 1e-12 * dt_ &&
         std::abs(t_start_ - other.t_start_) <= 1e-9 * dt_;
}

SampledSignal& SampledSignal::operator*=(cplx factor) {
  if (rep_ == Representation::real_voltage && factor.imag() != 0.0)
    throw DomainError("a real voltage can only be scaled by a real factor");
  for (auto& v : samples_) v *= factor;
  return *this;
}

void require_same_grid(const SampledSignal& a, const SampledSignal& b) {
  if (!a.same_grid(b)) {
    std::ostringstream msg;
    msg << "signals do not share a grid (" << a.size() << " vs " << b.size()
        << " samples, dt " << a.dt() << " vs " << b.dt() << ")";
    throw ShapeError(msg.str());
  }
}

double wrap_phase(double radians) {
  double r = std::fmod(radians, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

PhaseDistribution::PhaseDistribution(Kind kind, std::vector<double> phases,
                                     std::vector<double> weights)
    : kind_(kind), phases_(std::move(phases)), weights_(std::move(weights)) {
  for (auto& p : phases_) {
    if (!std::isfinite(p)) throw DomainError("phase values must be finite");
    p = wrap_phase(p);
  }
}

PhaseDistribution PhaseDistribution::discrete_uniform(std::vector<double> phases) {
  if (phases.empty()) throw DomainError("discrete phase set must not be empty");
  std::vector<double> w(phases.size(), 1.0 / static_cast<double>(phases.size()));
  return {Kind::discrete_uniform, std::move(phases), std::move(w)};
}

PhaseDistribution PhaseDistribution::continuous_uniform() {
  return {Kind::continuous_uniform, {}, {}};
}

PhaseDistribution PhaseDistribution::weighted(
    std::vector<std::pair<double, double>> phase_weights) {
  if (phase_weights.empty()) throw DomainError("weighted phase list must not be empty");
  std::vector<double> phases;
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& [phi, w] : phase_weights) {
    if (!(w >= 0.0)) throw DomainError("phase weights must be non-negative");
    phases.push_back(phi);
    weights.push_back(w);
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "phase weights sum to " << total << ", expected 1";
    throw DomainError(msg.str());
  }
  return {Kind::weighted_discrete, std::move(phases), std::move(weights)};
}

PhaseDistribution PhaseDistribution::with_jitter(double sigma) const {
  if (!(sigma >= 0.0)) throw DomainError("phase jitter must be >= 0");
  PhaseDistribution copy = *this;
  copy.jitter_ = sigma;
  return copy;
}

double PhaseDistribution::mean_cos() const {
  if (kind_ == Kind::continuous_uniform) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < phases_.size(); ++i) acc += weights_[i] * std::cos(phases_[i]);
  // E[cos(phi + j)] = cos(phi) exp(-s^2/2) for j ~ N(0, s^2)
  return acc * std::exp(-0.5 * jitter_ * jitter_);
}

double PhaseDistribution::mean_cos_squared() const {
  if (kind_ == Kind::continuous_uniform) return 0.5;
  double acc = 0.0;
  for (std::size_t i = 0; i < phases_.size(); ++i)
    acc += weights_[i] * std::cos(2.0 * phases_[i]);
  return 0.5 + 0.5 * acc * std::exp(-2.0 * jitter_ * jitter_);
}

SampledSignal synthesize_pulse(const PulseSpec& spec, const TimeGrid& grid,
                               Representation rep) {
  spec.validate();
  grid.validate();
  if (!grid.covers(spec))
    throw DomainError("time grid must span 8 envelope sigmas on each side of the pulse");
  if (rep == Representation::real_voltage && grid.dt > 1.0 / (10.0 * spec.carrier_freq))
    throw SamplingError("grid too coarse for the carrier: dt must be <= 1/(10 f)");

  const std::size_t n = grid.size();
  std::vector<cplx> samples(n);
  const double omega = kTwoPi * spec.carrier_freq;
  const double inv_two_var = 1.0 / (2.0 * spec.envelope_sigma * spec.envelope_sigma);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = grid.time(i);
    const double u = t - spec.delay;
    const double env = spec.amplitude * std::exp(-u * u * inv_two_var);
    const double arg = omega * t + spec.phase;
    if (rep == Representation::analytic) {
      samples[i] = {env * std::cos(arg), env * std::sin(arg)};
    } else {
      samples[i] = {env * std::sin(arg), 0.0};
    }
  }
  return {rep, grid.t_start, grid.dt, std::move(samples)};
}

double sample_phase(const PhaseDistribution& dist, CounterRng& rng) {
  double phi = 0.0;
  switch (dist.kind()) {
    case PhaseDistribution::Kind::continuous_uniform:
      phi = kTwoPi * rng.uniform();
      break;
    case PhaseDistribution::Kind::discrete_uniform:
      phi = dist.phases()[rng.index(dist.phases().size())];
      break;
    case PhaseDistribution::Kind::weighted_discrete: {
      const double u = rng.uniform();
      const auto& w = dist.weights();
      double acc = 0.0;
      std::size_t k = 0;
      for (; k + 1 < w.size(); ++k) {
        acc += w[k];
        if (u < acc) break;
      }
      phi = dist.phases()[k];
      break;
    }
  }
  if (dist.jitter() > 0.0) phi = wrap_phase(phi + dist.jitter() * rng.normal());
  return phi;
}

SampledSignal mix(const SampledSignal& signal, double lo_freq, double lo_amp) {
  if (signal.representation() != Representation::real_voltage)
    throw DomainError("mix expects a real voltage signal");
  if (!(lo_freq > 0.0)) throw DomainError("LO frequency must be > 0");
  if (!(signal.dt() < 1.0 / (10.0 * lo_freq)))
    throw SamplingError("grid does not resolve the LO: dt must be < 1/(10 f_LO)");
  SampledSignal out = signal;
  const double omega = kTwoPi * lo_freq;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {out[i].real() * lo_amp * std::sin(omega * out.time(i)), 0.0};
  return out;
}

SampledSignal low_pass(const SampledSignal& signal, double cutoff) {
  if (!(cutoff > 0.0)) throw DomainError("low-pass cutoff must be > 0");
  std::vector<cplx> data(signal.samples().begin(), signal.samples().end());
  fft_in_place(data, Direction::forward);
  const std::size_t n = data.size();
  for (std::size_t k = 0; k < n; ++k)
    if (std::abs(bin_frequency(k, n, signal.dt())) > cutoff) data[k] = 0.0;
  fft_in_place(data, Direction::backward);
  if (signal.representation() == Representation::real_voltage) drop_imaginary(data);
  return {signal.representation(), signal.t_start(), signal.dt(), std::move(data)};
}

SampledSignal phase_shift(const SampledSignal& signal, double theta) {
  if (signal.representation() == Representation::analytic) {
    SampledSignal out = signal;
    out *= std::polar(1.0, theta);
    return out;
  }
  std::vector<cplx> data(signal.samples().begin(), signal.samples().end());
  fft_in_place(data, Direction::forward);
  const std::size_t n = data.size();
  const cplx up = std::polar(1.0, theta);
  const cplx down = std::conj(up);
  for (std::size_t k = 0; k < n; ++k) {
    if (k == 0 || 2 * k == n) {
      data[k] *= std::cos(theta);
    } else if (2 * k < n) {
      data[k] *= up;
    } else {
      data[k] *= down;
    }
  }
  fft_in_place(data, Direction::backward);
  drop_imaginary(data);
  return {signal.representation(), signal.t_start(), signal.dt(), std::move(data)};
}

double default_analytic_dt(const PulseSpec& pulse) { return pulse.envelope_sigma / 200.0; }

}  // namespace homlab
