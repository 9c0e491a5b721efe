#pragma once

// Classical input pulses, relative-phase ensembles and the heterodyne
// mixer chain with an ideal low-pass detector.

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "homlab/random.hpp"

namespace homlab {

using cplx = std::complex<double>;

/// Gaussian-enveloped carrier pulse.
/// Field: A exp(-(t - delay)^2 / (2 sigma^2)) times sin(wt + phase) for the
/// real voltage form or exp(i(wt + phase)) for the analytic form. Only the
/// envelope is delayed; the carrier phase reference is common to both inputs.
struct PulseSpec {
  double amplitude = 0.05;        // V
  double envelope_sigma = 1e-3;   // s
  double carrier_freq = 1e3;      // Hz
  double delay = 0.0;             // s
  double phase = 0.0;             // rad

  void validate() const;
};

/// Uniform sampling grid [t_start, t_end] with step dt, endpoints included.
struct TimeGrid {
  double t_start = 0.0;
  double t_end = 0.0;
  double dt = 0.0;

  void validate() const;
  std::size_t intervals() const;
  std::size_t size() const { return intervals() + 1; }
  double time(std::size_t i) const { return t_start + static_cast<double>(i) * dt; }

  /// True when [delay - n_sigma*sigma, delay + n_sigma*sigma] lies inside.
  bool covers(const PulseSpec& pulse, double n_sigma = 8.0) const;

  /// Smallest grid with step dt, anchored on multiples of dt, that covers
  /// every pulse by n_sigma envelope widths on each side.
  static TimeGrid for_pulses(std::span<const PulseSpec> pulses, double dt,
                             double n_sigma = 8.0);
};

enum class Representation { analytic, real_voltage };

/// Uniformly sampled field. The real voltage form stores zero imaginary parts.
class SampledSignal {
 public:
  SampledSignal(Representation rep, double t_start, double dt,
                std::vector<cplx> samples);

  static SampledSignal zeros(Representation rep, const TimeGrid& grid);

  Representation representation() const { return rep_; }
  double t_start() const { return t_start_; }
  double dt() const { return dt_; }
  double t_end() const { return t_start_ + dt_ * static_cast<double>(samples_.size() - 1); }
  std::size_t size() const { return samples_.size(); }
  double time(std::size_t i) const { return t_start_ + static_cast<double>(i) * dt_; }
  TimeGrid grid() const { return {t_start_, t_end(), dt_}; }

  std::span<const cplx> samples() const { return samples_; }
  std::span<cplx> samples() { return samples_; }
  const cplx& operator[](std::size_t i) const { return samples_[i]; }
  cplx& operator[](std::size_t i) { return samples_[i]; }

  /// |E|^2 sample by sample (for real voltages simply v^2).
  std::vector<double> intensity() const;

  bool same_grid(const SampledSignal& other) const;

  SampledSignal& operator*=(cplx factor);

 private:
  Representation rep_;
  double t_start_;
  double dt_;
  std::vector<cplx> samples_;
};

/// Throws ShapeError unless both signals share representation and grid.
void require_same_grid(const SampledSignal& a, const SampledSignal& b);

/// Ensemble law of the relative phase between the two inputs.
class PhaseDistribution {
 public:
  enum class Kind { discrete_uniform, continuous_uniform, weighted_discrete };

  static PhaseDistribution discrete_uniform(std::vector<double> phases);
  static PhaseDistribution continuous_uniform();
  static PhaseDistribution weighted(std::vector<std::pair<double, double>> phase_weights);

  /// Gaussian jitter (standard deviation in radians) added to every draw.
  PhaseDistribution with_jitter(double sigma) const;

  Kind kind() const { return kind_; }
  /// Support points reduced to [0, 2pi); empty for the continuous law.
  const std::vector<double>& phases() const { return phases_; }
  const std::vector<double>& weights() const { return weights_; }
  double jitter() const { return jitter_; }
  bool is_discrete() const { return kind_ != Kind::continuous_uniform; }

  /// E[cos(phi)] including jitter; zero is the no-second-order-fringe condition.
  double mean_cos() const;
  /// E[cos^2(phi)] including jitter.
  double mean_cos_squared() const;

 private:
  PhaseDistribution(Kind kind, std::vector<double> phases, std::vector<double> weights);

  Kind kind_;
  std::vector<double> phases_;
  std::vector<double> weights_;
  double jitter_ = 0.0;
};

/// Reduce an angle into [0, 2pi).
double wrap_phase(double radians);

SampledSignal synthesize_pulse(const PulseSpec& spec, const TimeGrid& grid,
                               Representation rep);

/// One draw of the relative phase.
double sample_phase(const PhaseDistribution& dist, CounterRng& rng);

/// Pointwise product with lo_amp * sin(2 pi lo_freq t).
SampledSignal mix(const SampledSignal& signal, double lo_freq, double lo_amp);

/// Ideal brick-wall filter: every DFT bin with |f| > cutoff is zeroed.
SampledSignal low_pass(const SampledSignal& signal, double cutoff);

/// Rotate the phase of every frequency component by theta.
/// Analytic signals are multiplied by exp(i theta); real voltages get the
/// Hermitian rotation (positive bins by exp(i theta), negative by exp(-i theta)).
SampledSignal phase_shift(const SampledSignal& signal, double theta);

/// Default analytic-path step: envelope_sigma / 200.
double default_analytic_dt(const PulseSpec& pulse);

}  // namespace homlab
