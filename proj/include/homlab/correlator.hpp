#pragma once

// Integrated detector intensities, the ensemble cross correlation of the two
// output ports and the dip visibility derived from it, together with the
// closed-form predictions for Gaussian pulses.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homlab/signals.hpp"
#include "homlab/stats.hpp"

namespace homlab {

struct IntensityOptions {
  /// For real voltages: low-pass v^2 at this cutoff before integrating
  /// (slow-detector carrier averaging). Zero integrates v^2 directly, which
  /// gives the same number whenever the window contains the whole pulse.
  double carrier_average_cutoff = 0.0;
};

/// Trapezoidal integral of |E|^2 over [window.t_start, window.t_end].
/// Window edges need not fall on samples; the intensity is interpolated
/// linearly there. Real voltages integrate the carrier-averaged intensity,
/// i.e. half the squared envelope.
double integrated_intensity(const SampledSignal& signal, const TimeGrid& window,
                            const IntensityOptions& opts = {});

/// Integrated intensities of both output ports, one pair per ensemble member.
/// Optional weights turn the record into an exact expectation over a
/// discrete phase law instead of a random sample.
struct EnsembleRecord {
  double delay = 0.0;
  std::vector<double> i_plus;
  std::vector<double> i_minus;
  std::vector<double> weights;  // empty: equally weighted samples

  std::size_t sample_count() const { return i_plus.size(); }
  void validate() const;
};

/// mean(I+ I-) / (mean(I+) mean(I-)).
double cross_correlation(const EnsembleRecord& record);

/// mean(I+ I-), the un-normalized correlation used for blocked/unblocked ratios.
double raw_cross_correlation(const EnsembleRecord& record);

/// Bootstrap CI and standard error of the normalized cross correlation,
/// resampling (I+, I-) pairs jointly. Equally weighted records only.
stats::BootstrapResult cross_correlation_bootstrap(const EnsembleRecord& record,
                                                   std::size_t n_resamples, double level,
                                                   stats::RandomStream stream);

/// 1 - c_zero / c_far.
double dip_visibility(double c_zero, double c_far);

/// Percentile bootstrap of V = 1 - C(0) / mean(C(far_k)). In every round each
/// record is resampled independently (pairs kept together).
stats::BootstrapResult dip_visibility_bootstrap(const EnsembleRecord& zero,
                                                std::span<const EnsembleRecord> far,
                                                std::size_t n_resamples, double level,
                                                stats::RandomStream stream);

/// E[cos^2 phi]; throws PreconditionError when |E[cos phi]| > 1e-9.
double analytic_visibility(const PhaseDistribution& dist);

/// Visibility reduction for unequal input amplitudes, eps = A2 / A1:
/// V (2 eps / (1 + eps^2))^2.
double mismatch_visibility(double visibility, double amplitude_ratio);

/// 1 - V_eff exp(-tau^2 / (2 sigma^2)) for Gaussian envelopes of width sigma.
double analytic_classical_dip(double tau, double envelope_sigma, const PhaseDistribution& dist,
                              double amplitude_ratio = 1.0);

/// Which normalization a curve uses: the classical correlation tends to 1 at
/// large delay, the quantum coincidence probability to |T|^4 + |R|^4.
enum class CurveNormalization { classical, quantum_probability, counts };

struct DipPoint {
  double tau = 0.0;
  double c_mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct DipCurve {
  std::vector<DipPoint> points;
  CurveNormalization normalization = CurveNormalization::classical;

  void validate() const;

  /// C(inf): mean of c_mean over the three largest-|tau| points.
  double far_reference() const;
  /// The point at tau = 0, or the one closest to it.
  const DipPoint& zero_delay_point() const;
  double visibility() const;

  /// CSV with header `tau_s,c_mean,ci_lo,ci_hi`.
  void write_csv(std::ostream& os) const;
  static DipCurve read_csv(std::istream& is);
};

std::string to_string(CurveNormalization n);

}  // namespace homlab
