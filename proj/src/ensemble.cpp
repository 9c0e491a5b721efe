#include "homlab/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "homlab/errors.hpp"

namespace homlab {

void RfChain::validate() const {
  if (!(lo_freq > 0.0)) throw DomainError("rf lo_freq must be > 0");
  if (!std::isfinite(lo_amp) || lo_amp == 0.0) throw DomainError("rf lo_amp must be nonzero");
  if (!(cutoff >= 0.0)) throw DomainError("rf cutoff must be >= 0");
  if (!(dt >= 0.0)) throw DomainError("rf dt must be >= 0");
}

void ClassicalSetup::validate() const {
  pulse.validate();
  if (!(amplitude_ratio > 0.0)) throw DomainError("amplitude_ratio must be > 0");
  splitter.validate();
  if (mzi) {
    mzi->ps1.validate();
    mzi->ps2.validate();
  }
  if (rf) rf->validate();
  if (!(dt >= 0.0)) throw DomainError("dt must be >= 0");
  if (window && !(window->second > window->first))
    throw DomainError("detector window needs end > start");
}

namespace {

double grid_step(const ClassicalSetup& setup) {
  if (setup.rf) {
    const double dt = setup.rf->dt > 0.0 ? setup.rf->dt : 1.0 / (20.0 * setup.rf->lo_freq);
    return dt;
  }
  return setup.dt > 0.0 ? setup.dt : default_analytic_dt(setup.pulse);
}

PulseSpec first_pulse(const ClassicalSetup& setup) {
  PulseSpec p = setup.pulse;
  p.delay = 0.0;
  p.phase = 0.0;
  return p;
}

PulseSpec second_pulse(const ClassicalSetup& setup, double delay, double phase) {
  PulseSpec p = setup.pulse;
  p.amplitude *= setup.amplitude_ratio;
  p.delay = delay;
  p.phase = phase;
  return p;
}

}  // namespace

TimeGrid classical_grid(const ClassicalSetup& setup, double delay) {
  const PulseSpec pulses[] = {first_pulse(setup), second_pulse(setup, delay, 0.0)};
  TimeGrid grid = TimeGrid::for_pulses(pulses, grid_step(setup));
  if (setup.window) {
    const double dt = grid.dt;
    const double lo = std::min(grid.t_start, std::floor(setup.window->first / dt + 1e-9) * dt);
    const double hi = std::max(grid.t_end, std::ceil(setup.window->second / dt - 1e-9) * dt);
    grid = {lo, hi, dt};
  }
  return grid;
}

PortIntensityModel::PortIntensityModel(const ClassicalSetup& setup, double delay)
    : setup_(setup), delay_(delay), grid_(classical_grid(setup, delay)), window_(grid_) {
  setup_.validate();
  if (setup_.window) window_ = {setup_.window->first, setup_.window->second, grid_.dt};
  rep_ = setup_.rf ? Representation::real_voltage : Representation::analytic;
  e1_ = synthesize_pulse(first_pulse(setup_), grid_, rep_);
  if (setup_.rf) {
    e1_ = mix(*e1_, setup_.rf->lo_freq, setup_.rf->lo_amp);
  } else {
    e2_base_ = synthesize_pulse(second_pulse(setup_, delay_, 0.0), grid_, rep_);
  }
}

std::pair<double, double> PortIntensityModel::operator()(double phase) const {
  SampledSignal e2 = e2_base_ ? *e2_base_
                              : synthesize_pulse(second_pulse(setup_, delay_, phase), grid_, rep_);
  if (setup_.rf) {
    e2 = mix(e2, setup_.rf->lo_freq, setup_.rf->lo_amp);
  } else {
    e2 *= std::polar(1.0, phase);
  }

  SplitOutputs out = setup_.mzi ? mzi_classical(*e1_, e2, *setup_.mzi)
                                : split(*e1_, e2, setup_.splitter);
  if (setup_.rf) {
    const double cutoff = setup_.rf->effective_cutoff();
    out.plus = low_pass(mix(out.plus, setup_.rf->lo_freq, setup_.rf->lo_amp), cutoff);
    out.minus = low_pass(mix(out.minus, setup_.rf->lo_freq, setup_.rf->lo_amp), cutoff);
    // Slow detector: v^2 low-passed at twice the envelope bandwidth 1/(2 pi sigma).
    IntensityOptions opts;
    opts.carrier_average_cutoff = 1.0 / (std::numbers::pi * setup_.pulse.envelope_sigma);
    return {integrated_intensity(out.plus, window_, opts),
            integrated_intensity(out.minus, window_, opts)};
  }
  return {integrated_intensity(out.plus, window_), integrated_intensity(out.minus, window_)};
}

EnsembleRecord sample_ensemble(const ClassicalSetup& setup, double delay, std::size_t n,
                               stats::RandomStream stream) {
  if (n < 2) throw DomainError("an ensemble needs at least two samples");
  const PortIntensityModel model(setup, delay);
  // Without jitter a discrete law only ever produces its support points.
  const bool memoize = setup.phases.is_discrete() && setup.phases.jitter() == 0.0;
  std::map<double, std::pair<double, double>> cache;

  EnsembleRecord record;
  record.delay = delay;
  record.i_plus.resize(n);
  record.i_minus.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(stream.seed, stream.stream, i);
    const double phi = sample_phase(setup.phases, rng);
    std::pair<double, double> ports;
    if (memoize) {
      auto it = cache.find(phi);
      if (it == cache.end()) it = cache.emplace(phi, model(phi)).first;
      ports = it->second;
    } else {
      ports = model(phi);
    }
    record.i_plus[i] = ports.first;
    record.i_minus[i] = ports.second;
  }
  return record;
}

EnsembleRecord exact_ensemble(const ClassicalSetup& setup, double delay) {
  if (!setup.phases.is_discrete() || setup.phases.jitter() != 0.0)
    throw PreconditionError("exact enumeration needs a discrete phase law without jitter");
  const PortIntensityModel model(setup, delay);
  EnsembleRecord record;
  record.delay = delay;
  for (std::size_t k = 0; k < setup.phases.phases().size(); ++k) {
    const auto [plus, minus] = model(setup.phases.phases()[k]);
    record.i_plus.push_back(plus);
    record.i_minus.push_back(minus);
    record.weights.push_back(setup.phases.weights()[k]);
  }
  return record;
}

std::size_t pilot_min_samples(const ClassicalSetup& setup, double delay, std::size_t pilot,
                              stats::RandomStream stream) {
  if (pilot < 2) throw DomainError("pilot run needs at least two samples");
  const EnsembleRecord record = sample_ensemble(setup, delay, pilot, stream);
  const auto plus = stats::SampleSummary::of(record.i_plus);
  const auto minus = stats::SampleSummary::of(record.i_minus);
  return std::max(stats::min_samples(plus), stats::min_samples(minus));
}

std::size_t auto_sample_count(const ClassicalSetup& setup, double delay, std::size_t pilot,
                              stats::RandomStream stream) {
  return std::max(pilot, pilot_min_samples(setup, delay, pilot, stream));
}

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("HOMLAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string("HOMLAB_THREADS must be a positive integer, got '") + env +
                        "'");
    }
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace homlab
