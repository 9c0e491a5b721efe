#include "homlab/fock.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <sstream>

#include "homlab/errors.hpp"

namespace homlab::fock {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSpeedOfLight = 299792458.0;

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

double sqrt_factorial(std::size_t n) {
  return std::exp(0.5 * std::lgamma(static_cast<double>(n) + 1.0));
}

void check_mode(int mode) {
  if (mode != 1 && mode != 2) throw DomainError("mode must be 1 or 2");
}

}  // namespace

TwoModeFockState::TwoModeFockState(std::size_t n_max)
    : n_max_(n_max), amps_((n_max + 1) * (n_max + 1)) {
  if (n_max < 2) throw DomainError("Fock truncation n_max must be >= 2");
}

TwoModeFockState TwoModeFockState::basis(std::size_t n, std::size_t m, std::size_t n_max) {
  TwoModeFockState s(std::max(n_max, n + m));
  s.set_amplitude(n, m, 1.0);
  return s;
}

cplx TwoModeFockState::amplitude(std::size_t n, std::size_t m) const {
  if (n + m > n_max_) return 0.0;
  return amps_[index(n, m)];
}

void TwoModeFockState::set_amplitude(std::size_t n, std::size_t m, cplx value) {
  if (n + m > n_max_) throw DomainError("photon number exceeds the Fock truncation");
  amps_[index(n, m)] = value;
}

void TwoModeFockState::add_amplitude(std::size_t n, std::size_t m, cplx value) {
  if (n + m > n_max_) throw DomainError("photon number exceeds the Fock truncation");
  amps_[index(n, m)] += value;
}

double TwoModeFockState::norm_squared() const {
  double acc = 0.0;
  for (const auto& a : amps_) acc += std::norm(a);
  return acc;
}

bool TwoModeFockState::is_normalized(double tol) const {
  return std::abs(norm_squared() - 1.0) <= tol;
}

TwoModeFockState TwoModeFockState::normalized() const {
  const double n2 = norm_squared();
  if (!(n2 > 0.0)) throw NormalizationError("cannot normalize the zero vector");
  TwoModeFockState out = *this;
  out *= 1.0 / std::sqrt(n2);
  return out;
}

std::vector<double> TwoModeFockState::photon_number_distribution() const {
  std::vector<double> p(n_max_ + 1, 0.0);
  for (std::size_t n = 0; n <= n_max_; ++n)
    for (std::size_t m = 0; n + m <= n_max_; ++m) p[n + m] += std::norm(amplitude(n, m));
  return p;
}

double TwoModeFockState::max_difference(const TwoModeFockState& other) const {
  const std::size_t top = std::max(n_max_, other.n_max_);
  double worst = 0.0;
  for (std::size_t n = 0; n <= top; ++n)
    for (std::size_t m = 0; n + m <= top; ++m)
      worst = std::max(worst, std::abs(amplitude(n, m) - other.amplitude(n, m)));
  return worst;
}

TwoModeFockState& TwoModeFockState::operator+=(const TwoModeFockState& other) {
  if (other.n_max_ > n_max_) {
    TwoModeFockState wider(other.n_max_);
    for (std::size_t n = 0; n <= n_max_; ++n)
      for (std::size_t m = 0; n + m <= n_max_; ++m) wider.set_amplitude(n, m, amplitude(n, m));
    *this = std::move(wider);
  }
  for (std::size_t n = 0; n <= other.n_max_; ++n)
    for (std::size_t m = 0; n + m <= other.n_max_; ++m) add_amplitude(n, m, other.amplitude(n, m));
  return *this;
}

TwoModeFockState& TwoModeFockState::operator*=(cplx factor) {
  for (auto& a : amps_) a *= factor;
  return *this;
}

TwoModeFockState operator+(TwoModeFockState a, const TwoModeFockState& b) { return a += b; }

TwoModeFockState operator*(cplx factor, TwoModeFockState s) { return s *= factor; }

TwoModeFockState beam_splitter_fock(const TwoModeFockState& state, double t_power) {
  if (!(t_power > 0.0 && t_power < 1.0)) throw DomainError("beam splitter t_power must lie in (0, 1)");
  const double st = std::sqrt(t_power);
  const double sr = std::sqrt(1.0 - t_power);
  const std::size_t top = state.n_max();
  TwoModeFockState out(top);
  for (std::size_t n = 0; n <= top; ++n) {
    for (std::size_t m = 0; n + m <= top; ++m) {
      const cplx a = state.amplitude(n, m);
      if (a == 0.0) continue;
      const double norm_in = 1.0 / (sqrt_factorial(n) * sqrt_factorial(m));
      // (st c + sr d)^n (sr c - st d)^m, choosing j c's from the first factor
      // and k c's from the second.
      for (std::size_t j = 0; j <= n; ++j) {
        const double first = binomial(n, j) * std::pow(st, static_cast<double>(j)) *
                             std::pow(sr, static_cast<double>(n - j));
        for (std::size_t k = 0; k <= m; ++k) {
          const double sign = ((m - k) % 2 == 0) ? 1.0 : -1.0;
          const double second = binomial(m, k) * std::pow(sr, static_cast<double>(k)) *
                                std::pow(st, static_cast<double>(m - k)) * sign;
          const std::size_t c = j + k;
          const std::size_t d = n + m - c;
          const double norm_out = sqrt_factorial(c) * sqrt_factorial(d);
          out.add_amplitude(c, d, a * first * second * norm_in * norm_out);
        }
      }
    }
  }
  return out;
}

TwoModeFockState phase_shift_fock(const TwoModeFockState& state, int mode, double theta) {
  check_mode(mode);
  TwoModeFockState out = state;
  for (std::size_t n = 0; n <= state.n_max(); ++n)
    for (std::size_t m = 0; n + m <= state.n_max(); ++m) {
      const double photons = static_cast<double>(mode == 1 ? n : m);
      out.set_amplitude(n, m, state.amplitude(n, m) * std::polar(1.0, theta * photons));
    }
  return out;
}

TwoModeFockState block_arm_fock(const TwoModeFockState& state, int mode) {
  check_mode(mode);
  TwoModeFockState out(state.n_max());
  for (std::size_t n = 0; n <= state.n_max(); ++n)
    for (std::size_t m = 0; n + m <= state.n_max(); ++m) {
      if (mode == 2) {
        out.add_amplitude(n, 0, state.amplitude(n, m));
      } else {
        out.add_amplitude(0, m, state.amplitude(n, m));
      }
    }
  return out;
}

double coincidence_prob(const TwoModeFockState& state) {
  double p = 0.0;
  for (std::size_t n = 1; n <= state.n_max(); ++n)
    for (std::size_t m = 1; n + m <= state.n_max(); ++m) p += std::norm(state.amplitude(n, m));
  return p;
}

TwoModeFockState mzi_quantum_output(double theta, std::optional<int> blocked_mode) {
  auto state = beam_splitter_fock(TwoModeFockState::basis(1, 1), 0.5);
  // A phase theta/2 per photon puts exp(i theta) on |0,2>.
  state = phase_shift_fock(state, 2, 0.5 * theta);
  if (blocked_mode) state = block_arm_fock(state, *blocked_mode);
  return beam_splitter_fock(state, 0.5);
}

double mzi_quantum_coincidence(double theta) { return coincidence_prob(mzi_quantum_output(theta)); }

// ---- Spectral model -------------------------------------------------------

void FilterTable::validate() const {
  if (freq_offset_hz.size() != transmission.size())
    throw DomainError("filter table columns differ in length");
  if (freq_offset_hz.size() < 2) throw DomainError("filter table needs at least two rows");
  for (std::size_t i = 0; i < transmission.size(); ++i) {
    if (!(transmission[i] >= 0.0 && transmission[i] <= 1.0))
      throw DomainError("filter transmission must lie in [0, 1]");
    if (i > 0 && !(freq_offset_hz[i] > freq_offset_hz[i - 1]))
      throw DomainError("filter table frequencies must be strictly increasing");
  }
}

double FilterTable::at(double omega) const {
  const double f = omega / kTwoPi;
  if (f < freq_offset_hz.front() || f > freq_offset_hz.back()) return 0.0;
  const auto hi = std::upper_bound(freq_offset_hz.begin(), freq_offset_hz.end(), f);
  if (hi == freq_offset_hz.end()) return transmission.back();
  const auto i = static_cast<std::size_t>(hi - freq_offset_hz.begin());
  const double f0 = freq_offset_hz[i - 1];
  const double f1 = freq_offset_hz[i];
  const double w = (f - f0) / (f1 - f0);
  return transmission[i - 1] + w * (transmission[i] - transmission[i - 1]);
}

double FilterTable::min_omega() const { return kTwoPi * freq_offset_hz.front(); }
double FilterTable::max_omega() const { return kTwoPi * freq_offset_hz.back(); }

FilterTable FilterTable::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DomainError("filter CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "freq_offset_hz,transmission")
    throw DomainError("filter CSV header must be freq_offset_hz,transmission");
  FilterTable table;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double f = 0.0;
    double tr = 0.0;
    if (!(fields >> f >> tr)) throw DomainError("malformed filter CSV row " + std::to_string(lineno));
    table.freq_offset_hz.push_back(f);
    table.transmission.push_back(tr);
  }
  table.validate();
  return table;
}

void JsaModel::validate() const {
  if (!(sigma_omega > 0.0)) throw DomainError("JSA sigma_omega must be > 0");
  if (filter) filter->validate();
}

std::optional<std::string> filter_coverage_warning(const JsaModel& jsa) {
  if (!jsa.filter) return std::nullopt;
  const double need = 6.0 * jsa.sigma_omega;
  if (jsa.filter->min_omega() <= -need && jsa.filter->max_omega() >= need) return std::nullopt;
  std::ostringstream msg;
  msg << "filter table spans [" << jsa.filter->freq_offset_hz.front() << ", "
      << jsa.filter->freq_offset_hz.back() << "] Hz, narrower than +-6 sigma_omega ("
      << need / kTwoPi << " Hz); the JSA is truncated";
  return msg.str();
}

double g_overlap(const JsaModel& jsa, double delta_tau) {
  jsa.validate();
  const double sigma = jsa.sigma_omega;
  const double half_span = 10.0 * sigma;
  double lo = -half_span;
  double hi = half_span;
  if (jsa.filter) {
    lo = std::max(lo, jsa.filter->min_omega());
    hi = std::min(hi, jsa.filter->max_omega());
  }
  const double k = 2.0 * std::abs(delta_tau);

  // Resolve the cosine with >= 16 points per period so the trapezoid rule
  // keeps its spectral accuracy; past the cap, integrate the piecewise-linear
  // interpolant against cos exactly instead, which cannot alias.
  constexpr std::size_t kMinIntervals = 4096;
  constexpr std::size_t kMaxIntervals = std::size_t{1} << 24;
  const double wanted = std::ceil(k * (2.0 * half_span) / (std::numbers::pi / 8.0));
  const bool capped = wanted > static_cast<double>(kMaxIntervals);
  const std::size_t n_full =
      capped ? kMaxIntervals : std::max(kMinIntervals, static_cast<std::size_t>(wanted));
  const double h = 2.0 * half_span / static_cast<double>(n_full);

  auto gauss = [&](double w) { return std::exp(-w * w / (2.0 * sigma * sigma)); };
  auto weight = [&](double w) {
    const double f = jsa.filter ? jsa.filter->at(w) : 1.0;
    return f * f * gauss(w);
  };

  double num = 0.0;
  double den = 0.0;
  double den_unfiltered = 0.0;
  if (!(hi > lo)) {
    if (jsa.renormalize) throw NormalizationError("filter removes the whole JSA");
    return 0.0;
  }
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / h)));
  const double step = (hi - lo) / static_cast<double>(n);

  if (!capped) {
    for (std::size_t i = 0; i <= n; ++i) {
      const double w = lo + static_cast<double>(i) * step;
      const double c = (i == 0 || i == n) ? 0.5 : 1.0;
      const double v = weight(w);
      num += c * v * std::cos(k * w);
      den += c * v;
    }
  } else {
    double w0 = lo;
    double v0 = weight(w0);
    for (std::size_t i = 1; i <= n; ++i) {
      const double w1 = lo + static_cast<double>(i) * step;
      const double v1 = weight(w1);
      const double slope = (v1 - v0) / step;
      // integral of (v0 + slope (w - w0)) cos(k w) over [w0, w1]
      const double s0 = std::sin(k * w0), s1 = std::sin(k * w1);
      const double c0 = std::cos(k * w0), c1 = std::cos(k * w1);
      num += v0 * (s1 - s0) / k + slope * (step * s1 / k + (c1 - c0) / (k * k));
      den += 0.5 * (v0 + v1);
      w0 = w1;
      v0 = v1;
    }
    num /= step;
  }

  if (jsa.renormalize) {
    if (!(den > 0.0)) throw NormalizationError("filtered JSA has zero norm");
    return num / den;
  }
  // Normalize to the unfiltered Gaussian over the full span.
  const double full_step = 2.0 * half_span / static_cast<double>(n_full);
  for (std::size_t i = 0; i <= n_full; ++i) {
    const double w = -half_span + static_cast<double>(i) * full_step;
    den_unfiltered += ((i == 0 || i == n_full) ? 0.5 : 1.0) * gauss(w);
  }
  return num * step / (den_unfiltered * full_step);
}

void QuantumModelParams::validate() const {
  if (!(t_power > 0.0 && t_power < 1.0)) throw DomainError("t_power must lie in (0, 1)");
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta must lie in [0, 1]");
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw DomainError("zeta must lie in [0, 1]");
  if (!(scale_k > 0.0)) throw DomainError("scale K must be > 0");
}

double hom_coincidence(double delta_tau, double t_power, const JsaModel& jsa) {
  QuantumModelParams p;
  p.t_power = t_power;
  p.validate();
  const double t2 = t_power;
  const double r2 = 1.0 - t_power;
  return t2 * t2 + r2 * r2 - 2.0 * t2 * r2 * g_overlap(jsa, delta_tau);
}

double hom_coincidence_from_overlap(double overlap, const QuantumModelParams& params) {
  const double t2 = params.t_power;
  const double r2 = params.r_power();
  const double distinguishable = t2 * t2 + r2 * r2;
  const double cross = 2.0 * t2 * r2;
  return params.scale_k *
         ((1.0 - params.zeta) * (distinguishable - cross * params.eta * overlap) +
          params.zeta * cross);
}

double hom_coincidence_noisy(double delta_tau, const QuantumModelParams& params,
                             const JsaModel& jsa) {
  params.validate();
  return hom_coincidence_from_overlap(g_overlap(jsa, delta_tau), params);
}

double derived_visibility(const QuantumModelParams& params) {
  params.validate();
  const double c_zero = hom_coincidence_from_overlap(1.0, params);
  const double c_far = hom_coincidence_from_overlap(0.0, params);
  if (!(c_far > 0.0)) throw NormalizationError("C(inf) vanished");
  return 1.0 - c_zero / c_far;
}

double zeta_from_extinction(double th_over_tv, double rv_over_rh) {
  if (!(th_over_tv > 1.0) || !(rv_over_rh > 1.0))
    throw DomainError("extinction ratios must exceed 1");
  // T_H + R_H = 1, T_V + R_V = 1, T_H = a T_V, R_V = b R_H.
  const double a = th_over_tv;
  const double b = rv_over_rh;
  const double r_h = (a - 1.0) / (a * b - 1.0);
  const double t_h = 1.0 - r_h;
  const double r_v = b * r_h;
  const double t_v = 1.0 - r_v;
  return t_h * t_v + r_h * r_v;
}

double eta_from_hwp_angle(double theta_rad) {
  const double s = std::sin(2.0 * theta_rad);
  return s * s;
}

double sigma_omega_from_wavelength(double sigma_lambda, double center_wavelength) {
  if (!(sigma_lambda > 0.0) || !(center_wavelength > 0.0))
    throw DomainError("wavelengths must be > 0");
  return kTwoPi * kSpeedOfLight * sigma_lambda / (center_wavelength * center_wavelength);
}

double sigma_wavelength_from_omega(double sigma_omega, double center_wavelength) {
  if (!(sigma_omega > 0.0) || !(center_wavelength > 0.0))
    throw DomainError("arguments must be > 0");
  return sigma_omega * center_wavelength * center_wavelength / (kTwoPi * kSpeedOfLight);
}

}  // namespace homlab::fock
