// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "homlab/correlator.hpp"
#include "homlab/ensemble.hpp"
#include "homlab/experiments.hpp"
#include "homlab/fit.hpp"
#include "homlab/fock.hpp"
#include "homlab/random.hpp"
#include "homlab/splitter.hpp"
#include "homlab/stats.hpp"

using namespace homlab;
namespace ex = homlab::experiments;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;
};

void note(Outcome& o, bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
void note(Outcome& o, bool ok, const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += buf;
  if (!ok) {
    o.detail += " [x]";
    o.pass = false;
  }
}

struct Law {
  const char* name;
  PhaseDistribution dist;
};

std::vector<Law> laws() {
  return {{"{0,pi}", PhaseDistribution::discrete_uniform({0.0, kPi})},
          {"{pi/2,3pi/2}", PhaseDistribution::discrete_uniform({kPi / 2, 3 * kPi / 2})},
          {"{0,pi/2,pi,3pi/2}",
           PhaseDistribution::discrete_uniform({0.0, kPi / 2, kPi, 3 * kPi / 2})},
          {"uniform", PhaseDistribution::continuous_uniform()}};
}

ex::ClassicalDipConfig dip_config(const PhaseDistribution& d, std::uint64_t seed) {
  ex::ClassicalDipConfig cfg;
  cfg.setup.phases = d;
  cfg.delays = ex::default_classical_delays();
  cfg.seed = seed;
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome c1_visibility_table() {
  Outcome o;
  const double want[] = {1.0, 0.0, 0.5, 0.5};
  const auto ls = laws();
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const double v = analytic_visibility(ls[i].dist);
    const double tol = ls[i].dist.is_discrete() ? 1e-12 : 1e-9;
    note(o, std::abs(v - want[i]) <= tol, "%s V=%.15g", ls[i].name, v);
  }
  return o;
}

Outcome c2_monte_carlo_dip() {
  Outcome o;
  const auto ls = laws();
  const std::pair<std::size_t, double> cases[] = {{0, 1.0}, {2, 0.5}};
  for (const auto& [idx, want] : cases) {
    const auto res = ex::run_classical_dip(dip_config(ls[idx].dist, 2024));
    const auto& ci = res.visibility_bootstrap.ci;
    std::size_t n0 = 0;
    for (const auto& d : res.delays)
      if (d.delay == 0.0) n0 = d.samples;
    note(o, ci.contains(want), "%s V=%.6f CI=[%.6f, %.6f] N(0)=%zu", ls[idx].name,
         res.visibility, ci.lo, ci.hi, n0);
  }
  return o;
}

Outcome c3_analytic_vs_mc() {
  // 5 standard errors, with an absolute floor of 1e-12 where the ensemble
  // has no spread (the SE is then 0 and C is exact up to rounding).
  Outcome o;
  for (const auto& law : laws()) {
    const auto res = ex::run_classical_dip(dip_config(law.dist, 99));
    double worst = 0.0;
    double worst_gap = 0.0;
    bool ok = true;
    for (const auto& d : res.delays) {
      const double analytic = analytic_classical_dip(d.delay, 1e-3, law.dist);
      const double gap = std::abs(d.correlation.estimate - analytic);
      const double allowed = std::max(5.0 * d.correlation.std_error, 1e-12);
      ok = ok && gap <= allowed;
      if (gap / allowed > worst) {
        worst = gap / allowed;
        worst_gap = gap;
      }
    }
    note(o, ok && res.delays.size() == 15, "%s max |dC|/(5 SE)=%.3f (|dC|=%.2e)", law.name, worst,
         worst_gap);
  }
  return o;
}

Outcome c4_rf_chain() {
  Outcome o;
  for (const auto& idx : {0, 2}) {
    const auto law = laws()[static_cast<std::size_t>(idx)];
    auto cfg = dip_config(law.dist, 7);
    cfg.bootstrap = 200;
    const auto direct = ex::run_classical_dip(cfg);
    cfg.setup.rf = RfChain{};
    const auto rf = ex::run_classical_dip(cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < direct.delays.size(); ++i)
      worst = std::max(worst, std::abs(direct.delays[i].correlation.estimate -
                                       rf.delays[i].correlation.estimate));
    note(o, worst <= 1e-3, "%s max |C_rf - C|=%.2e", law.name, worst);
  }
  return o;
}

Outcome c5_fock_identities() {
  using namespace fock;
  Outcome o;
  const double h = std::sqrt(0.5);
  const auto a = beam_splitter_fock(TwoModeFockState::basis(1, 1), 0.5);
  TwoModeFockState want_a(2);
  want_a.set_amplitude(2, 0, h);
  want_a.set_amplitude(0, 2, -h);
  note(o, a.max_difference(want_a) <= 1e-12, "|1,1> err=%.1e", a.max_difference(want_a));

  const auto b = beam_splitter_fock(TwoModeFockState::basis(2, 0), 0.5);
  TwoModeFockState want_b(2);
  want_b.set_amplitude(2, 0, 0.5);
  want_b.set_amplitude(0, 2, 0.5);
  want_b.set_amplitude(1, 1, h);
  note(o, b.max_difference(want_b) <= 1e-12, "|2,0> err=%.1e", b.max_difference(want_b));

  double worst_norm = 0.0, worst_number = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    TwoModeFockState st(6);
    CounterRng rng(555, s);
    for (std::size_t n = 0; n <= 6; ++n)
      for (std::size_t m = 0; n + m <= 6; ++m) st.set_amplitude(n, m, {rng.normal(), rng.normal()});
    st = st.normalized();
    const double t = rng.uniform();
    const auto out = beam_splitter_fock(st, t);
    worst_norm = std::max(worst_norm, std::abs(out.norm_squared() - 1.0));
    const auto pin = st.photon_number_distribution();
    const auto pout = out.photon_number_distribution();
    for (std::size_t n = 0; n < pin.size(); ++n)
      worst_number = std::max(worst_number, std::abs(pin[n] - pout[n]));
  }
  note(o, worst_norm <= 1e-12, "100 states norm err=%.1e", worst_norm);
  note(o, worst_number <= 1e-12, "photon-number err=%.1e", worst_number);
  return o;
}

Outcome c6_complementarity() {
  Outcome o;
  const auto q = ex::run_complementarity_quantum({});
  note(o, std::abs(q.ratio - 0.25) <= 1e-9, "quantum ratio=%.12f", q.ratio);
  ex::ClassicalComplementarityConfig cc;
  cc.setup.phases = PhaseDistribution::discrete_uniform({0.0, kPi});
  const auto c = ex::run_complementarity_classical(cc);
  note(o, c.exact && std::abs(c.ratio - 0.5) <= 1e-9, "classical ratio=%.12f", c.ratio);
  return o;
}

Outcome c7_mzi() {
  Outcome o;
  ex::MziScanConfig cfg;
  cfg.points = 100;
  cfg.classical.phases = PhaseDistribution::discrete_uniform({0.0, kPi});
  const auto rows = ex::run_mzi_scan(cfg);
  double worst_q = 0.0;
  for (const auto& r : rows) {
    const double c = std::cos(r.theta / 2);
    worst_q = std::max(worst_q, std::abs(r.quantum - c * c));
  }
  note(o, rows.size() == 100 && worst_q <= 1e-12, "quantum max err=%.1e", worst_q);

  // Per input phase, output energies relative to the input energy.
  double worst_c = 0.0;
  for (double phi : {0.0, kPi}) {
    PulseSpec p1, p2;
    p2.phase = phi;
    const PulseSpec ps[] = {p1, p2};
    const auto grid = TimeGrid::for_pulses(ps, p1.envelope_sigma / 200);
    const auto e1 = synthesize_pulse(p1, grid, Representation::analytic);
    const auto e2 = synthesize_pulse(p2, grid, Representation::analytic);
    const double e_in = integrated_intensity(e1, grid) + integrated_intensity(e2, grid);
    MziConfig m;
    const auto ref = mzi_classical(e1, e2, m);
    const double ref_p = integrated_intensity(ref.plus, grid);
    const double ref_m = integrated_intensity(ref.minus, grid);
    for (const auto& r : rows) {
      m.arm_phase = r.theta;
      const auto out = mzi_classical(e1, e2, m);
      worst_c = std::max({worst_c, std::abs(integrated_intensity(out.plus, grid) - ref_p) / e_in,
                          std::abs(integrated_intensity(out.minus, grid) - ref_m) / e_in});
    }
  }
  double worst_mean = 0.0;
  for (const auto& r : rows)
    worst_mean = std::max({worst_mean, std::abs(r.mean_i_plus - rows[0].mean_i_plus),
                           std::abs(r.mean_i_minus - rows[0].mean_i_minus)});
  const double scale = rows[0].mean_i_plus + rows[0].mean_i_minus;
  note(o, worst_c <= 1e-12, "classical per-phase drift=%.1e of input", worst_c);
  note(o, worst_mean <= 1e-12 * scale, "ensemble-mean drift=%.1e of total", worst_mean / scale);
  return o;
}

Outcome c8_quantum_model() {
  using namespace fock;
  Outcome o;
  JsaModel jsa;
  jsa.sigma_omega = sigma_omega_from_wavelength(0.581e-9);
  const double c0 = hom_coincidence(0.0, 0.5, jsa);
  const double cinf = hom_coincidence(1e3 / jsa.sigma_omega, 0.5, jsa);
  note(o, std::abs(c0) <= 1e-9 && std::abs(cinf - 0.5) <= 1e-9, "C(0)=%.2e C(inf)=%.12f", c0, cinf);
  double worst = 0.0;
  for (int i = -40; i <= 40; ++i) {
    const double tau = i * 0.1 / jsa.sigma_omega;
    const double closed =
        0.5 * (1 - std::exp(-2 * jsa.sigma_omega * jsa.sigma_omega * tau * tau));
    worst = std::max(worst, std::abs(hom_coincidence(tau, 0.5, jsa) - closed));
  }
  note(o, worst <= 1e-9, "Gaussian closed-form max err=%.1e", worst);
  QuantumModelParams p;
  p.t_power = 0.52;
  p.eta = 0.9995;
  p.zeta = 0.038;
  const double v = derived_visibility(p);
  note(o, std::abs(v - 0.9606) <= 0.002, "derived V=%.6f (target 0.9606 +- 0.002)", v);
  return o;
}

Outcome c9_fit_round_trip() {
  Outcome o;
  ex::QuantumDipConfig cfg;
  cfg.params.t_power = 0.52;
  cfg.params.eta = 0.9995;
  cfg.params.zeta = 0.038;
  cfg.params.scale_k = 2303;
  cfg.jsa.sigma_omega = fock::sigma_omega_from_wavelength(0.581e-9);
  cfg.poisson = true;
  cfg.repetitions = 100;
  cfg.bootstrap = 200;
  cfg.seed = 11;
  const auto dip = ex::run_quantum_dip(cfg);
  std::vector<fit::CountPoint> data;
  for (const auto& pt : dip.curve.points) data.push_back({pt.tau, pt.c_mean});

  fit::QuantumFitSetup setup;
  setup.params.t_power = cfg.params.t_power;
  setup.free = {fit::kScaleK, fit::kSigmaOmega, fit::kZeta, fit::kEta};
  const auto r = fit::fit_quantum(data, setup);
  auto rel = [](double got, double want) { return std::abs(got - want) / want; };
  const double rk = rel(r.value(fit::kScaleK), 2303);
  const double rs = rel(r.value(fit::kSigmaOmega), cfg.jsa.sigma_omega);
  const double rz = rel(r.value(fit::kZeta), 0.038);
  const double re = rel(r.value(fit::kEta), 0.9995);
  note(o, data.size() == 15, "%zu points", data.size());
  note(o, rk <= 0.05, "K=%.2f (%.2f%%)", r.value(fit::kScaleK), 100 * rk);
  note(o, rs <= 0.05, "sigma_w=%.4e (%.2f%%)", r.value(fit::kSigmaOmega), 100 * rs);
  note(o, rz <= 0.05, "zeta=%.5f (%.1f%%)", r.value(fit::kZeta), 100 * rz);
  note(o, re <= 0.05, "eta=%.5f (%.2f%%)", r.value(fit::kEta), 100 * re);
  note(o, r.r_squared > 0.99, "R^2=%.6f", r.r_squared);
  note(o, true, "identifiable=%s", r.identifiable ? "yes" : "no");
  return o;
}

Outcome c10_statistics() {
  Outcome o;
  const auto n5 = stats::min_samples({1.0, 0.05, 2});
  const auto n10 = stats::min_samples({1.0, 0.1, 2});
  note(o, n5 == 4 && n10 == 16, "min_samples=%zu,%zu", n5, n10);

  // 1000 samples of 100 standard normals; true mean 0.
  const std::size_t trials = 1000, n = 100;
  std::size_t covered = 0;
  std::vector<double> x(n);
  for (std::size_t t = 0; t < trials; ++t) {
    CounterRng rng(31337, t);
    for (auto& v : x) v = rng.normal();
    const auto ci = stats::bootstrap_ci(x, 10000, 0.95, {31337, ex::stream_key(streams::kBootstrap, t)});
    if (ci.contains(0.0)) ++covered;
  }
  const double coverage = static_cast<double>(covered) / trials;
  note(o, coverage >= 0.93 && coverage <= 0.97, "coverage=%.3f over %zu trials", coverage, trials);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "visibility table", c1_visibility_table},
      {2, "Monte-Carlo classical dip", c2_monte_carlo_dip},
      {3, "analytic vs Monte-Carlo curve", c3_analytic_vs_mc},
      {4, "RF-chain equivalence", c4_rf_chain},
      {5, "Fock identities", c5_fock_identities},
      {6, "complementarity separation", c6_complementarity},
      {7, "MZI interference", c7_mzi},
      {8, "quantum dip model", c8_quantum_model},
      {9, "fit round trip", c9_fit_round_trip},
      {10, "statistics", c10_statistics},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
