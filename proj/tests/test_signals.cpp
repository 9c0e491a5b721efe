#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "homlab/errors.hpp"
#include "homlab/signals.hpp"

using namespace homlab;

namespace {

constexpr double kPi = std::numbers::pi;

TimeGrid grid_for(const PulseSpec& p, double dt) {
  const PulseSpec ps[] = {p};
  return TimeGrid::for_pulses(ps, dt);
}

// Naive DFT magnitude at a frequency, used as an independent check of mix().
double tone_magnitude(const SampledSignal& s, double freq) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    acc += s[i].real() * std::polar(1.0, -2.0 * kPi * freq * s.time(i));
  return std::abs(acc) / static_cast<double>(s.size());
}

}  // namespace

TEST_CASE("real pulse peaks at the amplitude at its center") {
  PulseSpec p;
  p.phase = kPi / 2;  // sin(wt + pi/2) = 1 at t = 0
  const auto grid = grid_for(p, 1e-6);
  const auto s = synthesize_pulse(p, grid, Representation::real_voltage);
  double peak = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) peak = std::max(peak, std::abs(s[i].real()));
  CHECK(peak == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("zero amplitude gives a zero signal") {
  PulseSpec p;
  p.amplitude = 0.0;
  const auto s = synthesize_pulse(p, grid_for(p, 5e-6), Representation::analytic);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(s[i]) == 0.0);
}

TEST_CASE("phase pi negates the analytic pulse") {
  PulseSpec a;
  PulseSpec b = a;
  b.phase = kPi;
  const auto grid = grid_for(a, 5e-6);
  const auto sa = synthesize_pulse(a, grid, Representation::analytic);
  const auto sb = synthesize_pulse(b, grid, Representation::analytic);
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(std::abs(sa[i] + sb[i]) < 1e-15);
}

TEST_CASE("synthesis is bit-reproducible") {
  PulseSpec p;
  p.delay = 1.3e-3;
  p.phase = 0.7;
  const auto grid = grid_for(p, 2e-6);
  const auto a = synthesize_pulse(p, grid, Representation::real_voltage);
  const auto b = synthesize_pulse(p, grid, Representation::real_voltage);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("coarse grids and short grids are rejected") {
  PulseSpec p;
  const auto coarse = grid_for(p, 2e-4);  // 1/(10 f) = 1e-4
  CHECK_THROWS_AS(synthesize_pulse(p, coarse, Representation::real_voltage), SamplingError);
  CHECK_NOTHROW(synthesize_pulse(p, coarse, Representation::analytic));
  const TimeGrid short_grid{-2e-3, 2e-3, 1e-5};
  CHECK_THROWS_AS(synthesize_pulse(p, short_grid, Representation::analytic), DomainError);
  PulseSpec bad;
  bad.envelope_sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("time grid invariants") {
  CHECK_THROWS_AS((TimeGrid{0.0, 1.0, 0.3}).validate(), DomainError);
  CHECK_THROWS_AS((TimeGrid{1.0, 0.0, 0.1}).validate(), DomainError);
  const TimeGrid g{-1.0, 1.0, 0.25};
  CHECK(g.size() == 9);
  PulseSpec a, b;
  b.delay = 3e-3;
  const PulseSpec ps[] = {a, b};
  const auto grid = TimeGrid::for_pulses(ps, 1e-5);
  CHECK(grid.covers(a));
  CHECK(grid.covers(b));
  CHECK_NOTHROW(grid.validate());
}

TEST_CASE("phase distributions") {
  SUBCASE("singleton always returns its phase") {
    const auto d = PhaseDistribution::discrete_uniform({0.0});
    for (std::uint64_t i = 0; i < 100; ++i) {
      CounterRng rng(1, 2, i);
      CHECK(sample_phase(d, rng) == 0.0);
    }
  }
  SUBCASE("{0, pi} draws are balanced") {
    const auto d = PhaseDistribution::discrete_uniform({0.0, kPi});
    const int n = 100000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
      CounterRng rng(42, 0, static_cast<std::uint64_t>(i));
      if (sample_phase(d, rng) == 0.0) ++zeros;
    }
    CHECK(std::abs(zeros / static_cast<double>(n) - 0.5) < 0.01);
  }
  SUBCASE("mean cos vanishes within 3/sqrt(N) for the four standard laws") {
    const std::vector<PhaseDistribution> laws = {
        PhaseDistribution::discrete_uniform({0.0, kPi}),
        PhaseDistribution::discrete_uniform({kPi / 2, 3 * kPi / 2}),
        PhaseDistribution::discrete_uniform({0.0, kPi / 2, kPi, 3 * kPi / 2}),
        PhaseDistribution::continuous_uniform()};
    const int n = 100000;
    for (std::size_t k = 0; k < laws.size(); ++k) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        CounterRng rng(7, k, static_cast<std::uint64_t>(i));
        acc += std::cos(sample_phase(laws[k], rng));
      }
      CHECK(std::abs(acc / n) < 3.0 / std::sqrt(static_cast<double>(n)));
    }
  }
  SUBCASE("weights must sum to one") {
    CHECK_THROWS_AS(PhaseDistribution::weighted({{0.0, 0.5}, {kPi, 0.4}}), DomainError);
    const auto w = PhaseDistribution::weighted({{0.0, 0.25}, {kPi, 0.75}});
    CHECK(w.mean_cos() == doctest::Approx(-0.5));
  }
  SUBCASE("phases are reduced to [0, 2pi)") {
    const auto d = PhaseDistribution::discrete_uniform({-kPi / 2, 5 * kPi});
    CHECK(d.phases()[0] == doctest::Approx(3 * kPi / 2));
    CHECK(d.phases()[1] == doctest::Approx(kPi));
  }
  SUBCASE("jitter damps the moments") {
    const auto d = PhaseDistribution::discrete_uniform({0.0, kPi}).with_jitter(0.1);
    CHECK(d.mean_cos_squared() == doctest::Approx(0.5 + 0.5 * std::exp(-0.02)));
  }
}

TEST_CASE("mixer") {
  PulseSpec p;
  const auto grid = grid_for(p, 1e-6);
  const auto s = synthesize_pulse(p, grid, Representation::real_voltage);

  SUBCASE("zero LO amplitude") {
    const auto m = mix(s, 50e3, 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i].real() == 0.0);
  }
  SUBCASE("a tone mixed with the LO has energy only at f_L +- f") {
    // Long pure tone: 40 ms at 1 kHz with a 20 kHz LO.
    const TimeGrid g{0.0, 40e-3, 1e-6};
    std::vector<cplx> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(2 * kPi * 1e3 * g.time(i));
    const SampledSignal tone(Representation::real_voltage, g.t_start, g.dt, v);
    const auto m = mix(tone, 20e3, 1.0);
    CHECK(tone_magnitude(m, 21e3) == doctest::Approx(0.25).epsilon(1e-2));
    CHECK(tone_magnitude(m, 19e3) == doctest::Approx(0.25).epsilon(1e-2));
    CHECK(tone_magnitude(m, 20e3) < 1e-3);
    CHECK(tone_magnitude(m, 1e3) < 1e-3);
  }
  SUBCASE("mix, mix again, low-pass recovers lo_amp^2/2 times the input") {
    const double a_l = 0.8;
    const auto back = low_pass(mix(mix(s, 50e3, a_l), 50e3, a_l), 50e3);
    double err = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      err = std::max(err, std::abs(back[i].real() - 0.5 * a_l * a_l * s[i].real()));
      peak = std::max(peak, std::abs(s[i].real()));
    }
    CHECK(err < 1e-9 * peak);
  }
  SUBCASE("undersampled LO") {
    CHECK_THROWS_AS(mix(s, 200e3, 1.0), SamplingError);
  }
}

TEST_CASE("low-pass filter") {
  // Whole number of periods over the record, so the tones sit on DFT bins.
  const TimeGrid g{0.0, 1e-2 - 1e-5, 1e-5};
  SUBCASE("DC is unchanged") {
    const SampledSignal dc(Representation::real_voltage, g.t_start, g.dt,
                           std::vector<cplx>(g.size(), 0.3));
    const auto out = low_pass(dc, 1.0);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i].real() - 0.3) < 1e-12);
  }
  SUBCASE("a tone above the cutoff vanishes") {
    std::vector<cplx> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(2 * kPi * 5e3 * g.time(i));
    const SampledSignal tone(Representation::real_voltage, g.t_start, g.dt, v);
    const auto out = low_pass(tone, 1e3);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i].real()) < 1e-9);
  }
  SUBCASE("a tone below the cutoff passes") {
    std::vector<cplx> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(2 * kPi * 1e3 * g.time(i));
    const SampledSignal tone(Representation::real_voltage, g.t_start, g.dt, v);
    const auto out = low_pass(tone, 3e3);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i].real() - v[i].real()) < 1e-9);
  }
  CHECK_THROWS_AS(low_pass(SampledSignal::zeros(Representation::real_voltage, g), 0.0),
                  DomainError);
}

TEST_CASE("phase_shift on a real carrier matches a shifted synthesis") {
  PulseSpec p;
  const auto grid = grid_for(p, 1e-6);
  const auto s = synthesize_pulse(p, grid, Representation::real_voltage);
  PulseSpec q = p;
  q.phase = 0.9;
  const auto expected = synthesize_pulse(q, grid, Representation::real_voltage);
  const auto shifted = phase_shift(s, 0.9);
  for (std::size_t i = 0; i < s.size(); ++i)
    CHECK(std::abs(shifted[i].real() - expected[i].real()) < 1e-9);
}
