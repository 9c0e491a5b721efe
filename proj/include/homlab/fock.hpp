#pragma once

// Exact two-mode Fock-space engine and the quantum coincidence models.

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace homlab::fock {

using cplx = std::complex<double>;

/// Pure state sum_{n+m <= n_max} a_{n,m} |n, m>.
class TwoModeFockState {
 public:
  explicit TwoModeFockState(std::size_t n_max);

  /// |n, m> with unit amplitude.
  static TwoModeFockState basis(std::size_t n, std::size_t m, std::size_t n_max = 2);

  std::size_t n_max() const { return n_max_; }

  cplx amplitude(std::size_t n, std::size_t m) const;
  void set_amplitude(std::size_t n, std::size_t m, cplx value);
  void add_amplitude(std::size_t n, std::size_t m, cplx value);

  double norm_squared() const;
  bool is_normalized(double tol = 1e-12) const;
  TwoModeFockState normalized() const;

  /// Probability mass on each total photon number 0..n_max.
  std::vector<double> photon_number_distribution() const;

  /// Largest |a - b| over all amplitudes (states may differ in n_max).
  double max_difference(const TwoModeFockState& other) const;

  TwoModeFockState& operator+=(const TwoModeFockState& other);
  TwoModeFockState& operator*=(cplx factor);

 private:
  std::size_t index(std::size_t n, std::size_t m) const { return n * (n_max_ + 1) + m; }

  std::size_t n_max_;
  std::vector<cplx> amps_;
};

TwoModeFockState operator+(TwoModeFockState a, const TwoModeFockState& b);
TwoModeFockState operator*(cplx factor, TwoModeFockState s);

/// Mode transform a+ -> sqrt(t) c+ + sqrt(1-t) d+, b+ -> sqrt(1-t) c+ - sqrt(t) d+,
/// applied by expanding (a+)^n (b+)^m / sqrt(n! m!).
TwoModeFockState beam_splitter_fock(const TwoModeFockState& state, double t_power);

/// Multiplies a_{n,m} by exp(i theta n) (mode 1) or exp(i theta m) (mode 2).
TwoModeFockState phase_shift_fock(const TwoModeFockState& state, int mode, double theta);

/// Absorbs every photon of `mode`: the projector I (x) sum_n |0><n| (or its
/// mirror), so |n, m> -> |n, 0> for mode 2. Amplitudes are kept as they are;
/// the result is not renormalized.
TwoModeFockState block_arm_fock(const TwoModeFockState& state, int mode);

/// Probability that both detectors click: sum over n >= 1, m >= 1 of |a_{n,m}|^2,
/// measured against the original unit norm.
double coincidence_prob(const TwoModeFockState& state);

/// |1,1> -> BS -> optional block -> two-photon phase theta -> BS.
/// theta is the phase acquired by |0,2> in the second arm; a physical
/// single-photon phase shifter of angle theta' gives theta = 2 theta'.
TwoModeFockState mzi_quantum_output(double theta, std::optional<int> blocked_mode = std::nullopt);
double mzi_quantum_coincidence(double theta);

// ---- Spectral model -------------------------------------------------------

/// Joint spectral amplitude over the half difference frequency w = (w2 - w1)/2.
///
/// sigma_omega is the standard deviation of the spectral intensity |phi(w)|^2,
/// so the overlap of a Gaussian JSA is exp(-2 sigma_omega^2 dtau^2). An
/// optional filter table multiplies the amplitude: f(w) = F(w) phi(w),
/// where F is interpolated linearly in the table and zero outside it.
struct FilterTable {
  std::vector<double> freq_offset_hz;  // strictly increasing
  std::vector<double> transmission;    // in [0, 1]

  void validate() const;
  /// F at angular offset w (rad/s); frequencies in the table are Hz.
  double at(double omega) const;
  double min_omega() const;
  double max_omega() const;

  /// Two-column CSV with header `freq_offset_hz,transmission`.
  static FilterTable read_csv(std::istream& is);
};

struct JsaModel {
  double sigma_omega = 1.0;               // rad/s
  std::optional<FilterTable> filter;
  /// Renormalize f after filtering so the overlap at zero delay is 1. When
  /// false the overlap is normalized to the unfiltered Gaussian.
  bool renormalize = true;

  void validate() const;
};

/// Warning text when the filter table does not span +-6 sigma_omega.
std::optional<std::string> filter_coverage_warning(const JsaModel& jsa);

/// integral dw |f(w)|^2 cos(2 w dtau) / integral dw |f(w)|^2.
double g_overlap(const JsaModel& jsa, double delta_tau);

struct QuantumModelParams {
  double t_power = 0.5;   // |T|^2
  double eta = 1.0;       // indistinguishability retained
  double zeta = 0.0;      // both photons on one source port
  double scale_k = 1.0;   // counts per unit probability

  void validate() const;
  double r_power() const { return 1.0 - t_power; }
};

/// |T|^4 + |R|^4 - 2 |T|^2 |R|^2 g(dtau).
double hom_coincidence(double delta_tau, double t_power, const JsaModel& jsa);

/// K [(1 - zeta)(|T|^4 + |R|^4 - 2|T|^2|R|^2 eta g) + 2 zeta |T|^2 |R|^2].
double hom_coincidence_noisy(double delta_tau, const QuantumModelParams& params,
                             const JsaModel& jsa);

/// Same model with the overlap value supplied directly.
double hom_coincidence_from_overlap(double overlap, const QuantumModelParams& params);

/// 1 - C(0) / C(inf) with overlap 1 at zero delay and 0 at infinity.
double derived_visibility(const QuantumModelParams& params);

/// zeta = T_H T_V + R_H R_V for a lossless PBS with the given extinction
/// ratios T_H/T_V and R_V/R_H.
double zeta_from_extinction(double th_over_tv, double rv_over_rh);

/// eta = sin^2(2 theta) for a half-wave plate at angle theta.
double eta_from_hwp_angle(double theta_rad);

/// Spectral-width conversion: a wavelength standard deviation (m) around
/// center_wavelength (m) to the angular-frequency standard deviation (rad/s),
/// sigma_w = 2 pi c sigma_lambda / lambda^2.
double sigma_omega_from_wavelength(double sigma_lambda, double center_wavelength = 810e-9);
double sigma_wavelength_from_omega(double sigma_omega, double center_wavelength = 810e-9);

}  // namespace homlab::fock
