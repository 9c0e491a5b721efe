#pragma once

// Builds ensembles of integrated port intensities for the classical
// experiments: two pulses, a relative phase drawn per ensemble member, a
// splitter or an interferometer, optionally the heterodyne chain.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>

#include "homlab/correlator.hpp"
#include "homlab/signals.hpp"
#include "homlab/splitter.hpp"
#include "homlab/stats.hpp"

namespace homlab {

/// Up-conversion of both inputs, the splitter, down-conversion of both
/// outputs with the same LO, then the brick-wall detector.
struct RfChain {
  double lo_freq = 50e3;  // Hz
  double lo_amp = 1.0;    // V
  double cutoff = 0.0;    // Hz; 0 means lo_freq
  double dt = 0.0;        // s; 0 means 1/(20 lo_freq)

  void validate() const;
  double effective_cutoff() const { return cutoff > 0.0 ? cutoff : lo_freq; }
};

struct ClassicalSetup {
  /// Input 1. Input 2 is the same pulse scaled by amplitude_ratio, delayed by
  /// tau and phase-shifted by the drawn phase. The delay and phase fields of
  /// `pulse` are ignored.
  PulseSpec pulse;
  double amplitude_ratio = 1.0;  // A2 / A1
  PhaseDistribution phases = PhaseDistribution::discrete_uniform({0.0, 3.141592653589793});
  SplitterSpec splitter;
  std::optional<MziConfig> mzi;  // replaces the single splitter when set
  std::optional<RfChain> rf;
  double dt = 0.0;  // analytic step; 0 means envelope_sigma / 200
  /// Detector window [start, end] in absolute time. Unset: the whole record.
  std::optional<std::pair<double, double>> window;

  void validate() const;
};

/// Sampling grid for one delay: both pulses +-8 sigma, plus the window.
TimeGrid classical_grid(const ClassicalSetup& setup, double delay);

/// Evaluates (I+, I-) for one relative phase at one delay. Reuses the
/// synthesized pulses across calls.
class PortIntensityModel {
 public:
  PortIntensityModel(const ClassicalSetup& setup, double delay);

  std::pair<double, double> operator()(double phase) const;
  const TimeGrid& grid() const { return grid_; }

 private:
  ClassicalSetup setup_;
  double delay_;
  TimeGrid grid_;
  TimeGrid window_;
  Representation rep_;
  std::optional<SampledSignal> e1_;
  std::optional<SampledSignal> e2_base_;  // analytic path, phase 0
};

/// n members with phases drawn from (seed, stream, member index).
EnsembleRecord sample_ensemble(const ClassicalSetup& setup, double delay, std::size_t n,
                               stats::RandomStream stream);

/// Exact expectation over a discrete phase law without jitter: one weighted
/// member per support point.
EnsembleRecord exact_ensemble(const ClassicalSetup& setup, double delay);

/// max(min_samples(I+), min_samples(I-)) from a pilot run of `pilot` members.
std::size_t pilot_min_samples(const ClassicalSetup& setup, double delay, std::size_t pilot,
                              stats::RandomStream stream);

/// The "auto" ensemble size: max(pilot, pilot_min_samples(...)).
std::size_t auto_sample_count(const ClassicalSetup& setup, double delay, std::size_t pilot,
                              stats::RandomStream stream);

/// Worker count from HOMLAB_THREADS, else the hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. The first
/// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace homlab
