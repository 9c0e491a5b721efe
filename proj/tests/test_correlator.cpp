#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "homlab/correlator.hpp"
#include "homlab/ensemble.hpp"
#include "homlab/errors.hpp"

using namespace homlab;

namespace {

constexpr double kPi = std::numbers::pi;

PhaseDistribution two_phase() { return PhaseDistribution::discrete_uniform({0.0, kPi}); }
PhaseDistribution four_phase() {
  return PhaseDistribution::discrete_uniform({0.0, kPi / 2, kPi, 3 * kPi / 2});
}

// Simpson's rule over a symmetric range, as an independent quadrature.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("integrated intensity") {
  PulseSpec p;
  const PulseSpec ps[] = {p};
  const auto grid = TimeGrid::for_pulses(ps, p.envelope_sigma / 200);
  const auto s = synthesize_pulse(p, grid, Representation::analytic);

  SUBCASE("Gaussian pulse integrates to A^2 sigma sqrt(pi)") {
    const double expected = p.amplitude * p.amplitude * p.envelope_sigma * std::sqrt(kPi);
    CHECK(integrated_intensity(s, grid) == doctest::Approx(expected).epsilon(1e-3));
  }
  SUBCASE("half window holds half the energy") {
    const TimeGrid half{0.0, grid.t_end, grid.dt};
    CHECK(integrated_intensity(s, half) / integrated_intensity(s, grid) ==
          doctest::Approx(0.5).epsilon(1e-3));
  }
  SUBCASE("window edges between samples") {
    const TimeGrid w{-1.23456e-3, 2.1e-3, grid.dt};
    const double A = p.amplitude, sg = p.envelope_sigma;
    const double oracle = simpson(
        [&](double t) { return A * A * std::exp(-t * t / (sg * sg)); }, w.t_start, w.t_end, 20000);
    CHECK(integrated_intensity(s, w) == doctest::Approx(oracle).epsilon(1e-5));
  }
  SUBCASE("zero signal") {
    CHECK(integrated_intensity(SampledSignal::zeros(Representation::analytic, grid), grid) == 0.0);
  }
  SUBCASE("window outside the record") {
    const TimeGrid w{grid.t_start - 1e-3, grid.t_end, grid.dt};
    CHECK_THROWS_AS(integrated_intensity(s, w), DomainError);
  }
  SUBCASE("real voltage carries half the squared envelope") {
    const auto fine = TimeGrid::for_pulses(ps, 1e-6);
    const auto v = synthesize_pulse(p, fine, Representation::real_voltage);
    const double expected = 0.5 * p.amplitude * p.amplitude * p.envelope_sigma * std::sqrt(kPi);
    CHECK(integrated_intensity(v, fine) == doctest::Approx(expected).epsilon(1e-6));
    IntensityOptions opts;
    opts.carrier_average_cutoff = 2e3;
    CHECK(integrated_intensity(v, fine, opts) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("cross correlation examples") {
  EnsembleRecord constant{0.0, {2.0, 2.0, 2.0}, {2.0, 2.0, 2.0}, {}};
  CHECK(cross_correlation(constant) == doctest::Approx(1.0));

  EnsembleRecord alternating{0.0, {1.0, 0.0, 1.0, 0.0}, {0.0, 1.0, 0.0, 1.0}, {}};
  CHECK(cross_correlation(alternating) == 0.0);

  EnsembleRecord dark{0.0, {0.0, 0.0}, {1.0, 2.0}, {}};
  CHECK_THROWS_AS(cross_correlation(dark), NormalizationError);

  EnsembleRecord single{0.0, {1.0}, {1.0}, {}};
  CHECK_THROWS_AS(cross_correlation(single), PreconditionError);

  EnsembleRecord negative{0.0, {1.0, -1.0}, {1.0, 1.0}, {}};
  CHECK_THROWS_AS(cross_correlation(negative), DomainError);
}

TEST_CASE("cross correlation is scale invariant") {
  EnsembleRecord r{0.0, {1.0, 3.0, 0.5, 2.0}, {0.7, 0.1, 2.0, 1.0}, {}};
  const double c = cross_correlation(r);
  for (auto& v : r.i_plus) v *= 37.5;
  for (auto& v : r.i_minus) v *= 37.5;
  CHECK(cross_correlation(r) == doctest::Approx(c).epsilon(1e-14));
}

TEST_CASE("ideal {0, pi} ensemble: C = 0 at zero delay and 1 far away") {
  ClassicalSetup setup;
  setup.phases = two_phase();
  CHECK(cross_correlation(exact_ensemble(setup, 0.0)) < 1e-20);
  CHECK(cross_correlation(exact_ensemble(setup, 12e-3)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dip visibility") {
  CHECK(dip_visibility(0.0, 1.0) == 1.0);
  CHECK(dip_visibility(0.5, 1.0) == 0.5);
  CHECK(dip_visibility(0.0394, 1.0) == doctest::Approx(0.9606));
  CHECK_THROWS_AS(dip_visibility(0.1, 0.0), NormalizationError);
}

TEST_CASE("analytic visibility table") {
  CHECK(analytic_visibility(two_phase()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(analytic_visibility(
            PhaseDistribution::discrete_uniform({kPi / 2, 3 * kPi / 2}))) < 1e-12);
  CHECK(analytic_visibility(four_phase()) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(analytic_visibility(PhaseDistribution::continuous_uniform()) == 0.5);
  CHECK_THROWS_AS(analytic_visibility(PhaseDistribution::discrete_uniform({0.0})),
                  PreconditionError);
}

TEST_CASE("analytic dip") {
  const double s = 1e-3;
  CHECK(analytic_classical_dip(0.0, s, two_phase()) == 0.0);
  CHECK(analytic_classical_dip(1.0, s, two_phase()) == doctest::Approx(1.0));
  CHECK(analytic_classical_dip(s, s, two_phase()) ==
        doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-12));

  SUBCASE("overlap-squared form against direct quadrature of the pulse overlap") {
    // I(tau) = integral exp(-t^2/(2s^2)) exp(-(t-tau)^2/(2s^2)) dt
    for (double tau : {0.3e-3, 1e-3, 2.5e-3}) {
      auto overlap = [&](double d) {
        return simpson([&](double t) {
          return std::exp(-t * t / (2 * s * s)) * std::exp(-(t - d) * (t - d) / (2 * s * s));
        }, -12 * s, 12 * s, 20000);
      };
      const double ratio = overlap(tau) / overlap(0.0);
      CHECK(analytic_classical_dip(tau, s, two_phase()) ==
            doctest::Approx(1.0 - ratio * ratio).epsilon(1e-9));
    }
  }

  SUBCASE("visibility of the closed form recovers the phase-law value") {
    for (const auto& d : {two_phase(), four_phase(), PhaseDistribution::continuous_uniform()}) {
      const double v = dip_visibility(analytic_classical_dip(0.0, s, d),
                                      analytic_classical_dip(1.0, s, d));
      CHECK(v == doctest::Approx(analytic_visibility(d)).epsilon(1e-12));
    }
  }
}

TEST_CASE("mismatch visibility formula") {
  CHECK(mismatch_visibility(0.7, 1.0) == 0.7);
  for (double e : {0.2, 0.5, 0.9, 1.7})
    CHECK(mismatch_visibility(1.0, e) == doctest::Approx(mismatch_visibility(1.0, 1.0 / e)));
  CHECK_THROWS_AS(mismatch_visibility(1.0, 0.0), DomainError);
}

TEST_CASE("mismatch formula agrees with the simulator at five amplitude ratios") {
  // The simulator carries the unequal amplitudes through the splitter and
  // the correlator; the formula is trusted only if both agree.
  for (double eps : {0.3, 0.5, 0.7, 0.9, 1.4}) {
    for (const auto& d : {two_phase(), four_phase()}) {
      ClassicalSetup setup;
      setup.phases = d;
      setup.amplitude_ratio = eps;
      const double c0 = cross_correlation(exact_ensemble(setup, 0.0));
      const double cfar = cross_correlation(exact_ensemble(setup, 14e-3));
      CHECK(dip_visibility(c0, cfar) ==
            doctest::Approx(mismatch_visibility(analytic_visibility(d), eps)).epsilon(1e-9));
    }
    // Random ensemble with a continuous law: within its bootstrap interval.
    ClassicalSetup setup;
    setup.phases = PhaseDistribution::continuous_uniform();
    setup.amplitude_ratio = eps;
    const auto zero = sample_ensemble(setup, 0.0, 4000, {99, 1});
    const auto far = sample_ensemble(setup, 14e-3, 400, {99, 2});
    const EnsembleRecord fars[] = {far};
    const auto boot = dip_visibility_bootstrap(zero, fars, 2000, 0.999, {99, 3});
    CHECK(boot.ci.contains(mismatch_visibility(0.5, eps)));
  }
}

TEST_CASE("simulated dip is symmetric in tau") {
  ClassicalSetup setup;
  setup.phases = four_phase();
  for (double tau : {0.5e-3, 1.5e-3, 3e-3}) {
    const double plus = cross_correlation(exact_ensemble(setup, tau));
    const double minus = cross_correlation(exact_ensemble(setup, -tau));
    CHECK(plus == doctest::Approx(minus).epsilon(1e-12));
  }
}

TEST_CASE("bootstrap of the correlation") {
  ClassicalSetup setup;
  setup.phases = PhaseDistribution::continuous_uniform();
  const auto rec = sample_ensemble(setup, 0.5e-3, 500, {5, 6});
  const auto a = cross_correlation_bootstrap(rec, 1000, 0.95, {1, 2});
  const auto b = cross_correlation_bootstrap(rec, 1000, 0.95, {1, 2});
  CHECK(a.ci.lo == b.ci.lo);
  CHECK(a.ci.hi == b.ci.hi);
  CHECK(a.estimate == cross_correlation(rec));
  CHECK(a.ci.lo < a.estimate);
  CHECK(a.estimate < a.ci.hi);
  CHECK(a.std_error > 0.0);
  EnsembleRecord weighted = exact_ensemble(setup = ClassicalSetup{}, 0.0);
  CHECK_THROWS_AS(cross_correlation_bootstrap(weighted, 1000, 0.95, {}), PreconditionError);
}

TEST_CASE("dip curve") {
  DipCurve c;
  c.points = {{-2.0, 1.0, 0.9, 1.1}, {-1.0, 0.9, 0.8, 1.0}, {0.0, 0.1, 0.0, 0.2},
              {1.0, 0.95, 0.9, 1.0}, {2.0, 1.1, 1.0, 1.2}};
  CHECK_NOTHROW(c.validate());
  // three largest |tau|: -2, 2, then -1 (first of the tie at |tau| = 1)
  CHECK(c.far_reference() == doctest::Approx((1.0 + 1.1 + 0.9) / 3));
  CHECK(c.zero_delay_point().tau == 0.0);
  CHECK(c.visibility() == doctest::Approx(1.0 - 0.1 / ((1.0 + 1.1 + 0.9) / 3)));

  std::ostringstream os;
  c.write_csv(os);
  CHECK(os.str().rfind("tau_s,c_mean,ci_lo,ci_hi\n", 0) == 0);
  std::istringstream is(os.str());
  const auto back = DipCurve::read_csv(is);
  REQUIRE(back.points.size() == c.points.size());
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    CHECK(back.points[i].tau == c.points[i].tau);
    CHECK(back.points[i].c_mean == c.points[i].c_mean);
  }

  DipCurve bad = c;
  bad.points[1].ci_lo = 0.95;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = c;
  std::swap(bad.points[0], bad.points[1]);
  CHECK_THROWS_AS(bad.validate(), DomainError);
  std::istringstream wrong("tau,c\n1,2\n");
  CHECK_THROWS_AS(DipCurve::read_csv(wrong), DomainError);
}

TEST_CASE("heterodyne chain matches the direct path for a continuous phase law") {
  ClassicalSetup direct;
  direct.phases = PhaseDistribution::continuous_uniform();
  ClassicalSetup rf = direct;
  rf.rf = RfChain{};
  for (double tau : {0.0, 1e-3, 6e-3}) {
    const auto a = sample_ensemble(direct, tau, 60, {12, 3});
    const auto b = sample_ensemble(rf, tau, 60, {12, 3});
    CHECK(std::abs(cross_correlation(a) - cross_correlation(b)) < 1e-3);
  }
}
