#include "homlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <random>
#include <sstream>

#include "json.hpp"

#include "homlab/errors.hpp"
#include "homlab/random.hpp"

namespace homlab::experiments {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

// Far-delay reference indices: the three largest |tau|, ties broken by position.
std::vector<std::size_t> far_indices(std::span<const double> delays) {
  std::vector<std::size_t> order(delays.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(delays[a]) > std::abs(delays[b]);
  });
  order.resize(std::min<std::size_t>(3, order.size()));
  return order;
}

std::size_t zero_index(std::span<const double> delays) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < delays.size(); ++i)
    if (std::abs(delays[i]) < std::abs(delays[best])) best = i;
  return best;
}

// The closed-form dip assumes a balanced lossless splitter, full-record
// detection and a phase law without a first-order fringe.
bool closed_form_applies(const ClassicalSetup& s) {
  return !s.mzi && !s.window && s.splitter.t_power == 0.5 && s.splitter.phase_error == 0.0 &&
         std::abs(s.phases.mean_cos()) <= 1e-9;
}

DipPoint make_point(double tau, double c, const stats::ConfidenceInterval& ci) {
  return {tau, c, std::min(ci.lo, c), std::max(ci.hi, c)};
}

void check_delays(const std::vector<double>& delays) {
  if (delays.empty()) throw ConfigError("delay grid is empty");
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (!std::isfinite(delays[i])) throw ConfigError("delay grid contains a non-finite value");
    if (i > 0 && !(delays[i - 1] < delays[i]))
      throw ConfigError("delay grid must be strictly increasing");
  }
}

}  // namespace

std::uint64_t stream_key(std::uint64_t domain, std::uint64_t index) {
  return mix64(mix64(domain) ^ index);
}

// ---- Classical dip ---------------------------------------------------------------

void ClassicalDipConfig::validate() const {
  setup.validate();
  check_delays(delays);
  if (samples && *samples < 2) throw ConfigError("ensemble.samples must be >= 2");
  if (pilot < 2) throw ConfigError("ensemble.pilot must be >= 2");
  if (bootstrap < 100) throw ConfigError("ensemble.bootstrap must be >= 100");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("ensemble.level must lie in (0, 1)");
}

std::vector<double> default_classical_delays() {
  std::vector<double> d;
  for (int k = -7; k <= 7; ++k) d.push_back(1e-3 * k);
  return d;
}

ClassicalDipResult run_classical_dip(const ClassicalDipConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.delays.size();
  ClassicalDipResult result;
  result.delays.resize(n);
  result.records.resize(n);

  const bool closed_form = closed_form_applies(cfg.setup);
  parallel_for(n, [&](std::size_t i) {
    const double tau = cfg.delays[i];
    DelayStats& st = result.delays[i];
    st.delay = tau;
    if (cfg.samples) {
      st.samples = *cfg.samples;
    } else {
      st.pilot_min_samples = pilot_min_samples(cfg.setup, tau, cfg.pilot,
                                               {cfg.seed, stream_key(streams::kPilot, i)});
      st.samples = std::max(cfg.pilot, *st.pilot_min_samples);
    }
    result.records[i] =
        sample_ensemble(cfg.setup, tau, st.samples, {cfg.seed, stream_key(streams::kPhase, i)});
    st.correlation = cross_correlation_bootstrap(result.records[i], cfg.bootstrap, cfg.level,
                                                 {cfg.seed, stream_key(streams::kBootstrap, i)});
    if (closed_form)
      st.analytic = analytic_classical_dip(tau, cfg.setup.pulse.envelope_sigma, cfg.setup.phases,
                                           cfg.setup.amplitude_ratio);
  });

  for (const auto& st : result.delays)
    result.curve.points.push_back(make_point(st.delay, st.correlation.estimate, st.correlation.ci));
  result.curve.normalization = CurveNormalization::classical;
  result.curve.validate();

  if (n >= 2) {
    result.visibility = result.curve.visibility();
    std::vector<EnsembleRecord> far;
    for (std::size_t k : far_indices(cfg.delays)) far.push_back(result.records[k]);
    result.visibility_bootstrap = dip_visibility_bootstrap(
        result.records[zero_index(cfg.delays)], far, cfg.bootstrap, cfg.level,
        {cfg.seed, stream_key(streams::kBootstrap, std::numeric_limits<std::uint64_t>::max())});
  } else {
    result.visibility = std::numeric_limits<double>::quiet_NaN();
  }
  if (closed_form)
    result.analytic_visibility =
        mismatch_visibility(analytic_visibility(cfg.setup.phases), cfg.setup.amplitude_ratio);
  return result;
}

// ---- Complementarity --------------------------------------------------------------

ComplementarityResult run_complementarity_classical(const ClassicalComplementarityConfig& cfg) {
  ClassicalSetup case_a = cfg.setup;
  if (!case_a.mzi) case_a.mzi = MziConfig{};
  case_a.mzi->blocked = BlockedArm::none;
  ClassicalSetup case_b = case_a;
  case_b.mzi->blocked = cfg.blocked;
  case_a.validate();

  ComplementarityResult out;
  out.model = "classical";
  const bool enumerable = case_a.phases.is_discrete() && case_a.phases.jitter() == 0.0;
  if (!cfg.samples && enumerable) {
    out.exact = true;
    out.unblocked = raw_cross_correlation(exact_ensemble(case_a, cfg.delay));
    out.blocked = raw_cross_correlation(exact_ensemble(case_b, cfg.delay));
  } else {
    out.exact = false;
    out.samples = cfg.samples ? *cfg.samples
                              : auto_sample_count(case_a, cfg.delay, cfg.pilot,
                                                  {cfg.seed, stream_key(streams::kPilot, 0)});
    // Both cases see the same phase draws.
    const stats::RandomStream phases{cfg.seed, stream_key(streams::kPhase, 0)};
    out.unblocked = raw_cross_correlation(sample_ensemble(case_a, cfg.delay, out.samples, phases));
    out.blocked = raw_cross_correlation(sample_ensemble(case_b, cfg.delay, out.samples, phases));
  }
  if (!(out.unblocked > 0.0))
    throw NormalizationError("unblocked correlation is zero; the ratio is undefined");
  out.ratio = out.blocked / out.unblocked;
  return out;
}

ComplementarityResult run_complementarity_quantum(const QuantumComplementarityConfig& cfg) {
  ComplementarityResult out;
  out.model = "quantum";
  out.unblocked = fock::coincidence_prob(fock::mzi_quantum_output(cfg.theta));
  out.blocked = cfg.blocked_mode
                    ? fock::coincidence_prob(fock::mzi_quantum_output(cfg.theta, cfg.blocked_mode))
                    : out.unblocked;
  if (!(out.unblocked > 0.0))
    throw NormalizationError("unblocked coincidence probability is zero at this phase");
  out.ratio = out.blocked / out.unblocked;
  return out;
}

// ---- Interferometer phase scan ------------------------------------------------------

std::vector<MziScanRow> run_mzi_scan(const MziScanConfig& cfg) {
  if (cfg.points < 2) throw ConfigError("scan.points must be >= 2");
  ClassicalSetup setup = cfg.classical;
  if (!setup.mzi) setup.mzi = MziConfig{};
  std::vector<MziScanRow> rows(cfg.points);
  parallel_for(cfg.points, [&](std::size_t k) {
    MziScanRow& row = rows[k];
    row.theta = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(cfg.points - 1);
    row.quantum = fock::mzi_quantum_coincidence(row.theta);
    const double c = std::cos(0.5 * row.theta);
    row.closed_form = c * c;
    ClassicalSetup at = setup;
    at.mzi->arm_phase = row.theta;
    const EnsembleRecord rec = exact_ensemble(at, 0.0);
    double plus = 0.0, minus = 0.0;
    for (std::size_t i = 0; i < rec.sample_count(); ++i) {
      plus += rec.weights[i] * rec.i_plus[i];
      minus += rec.weights[i] * rec.i_minus[i];
    }
    row.mean_i_plus = plus;
    row.mean_i_minus = minus;
    row.correlation = cross_correlation(rec);
  });
  return rows;
}

// ---- Quantum dip ------------------------------------------------------------------

void QuantumDipConfig::validate() const {
  params.validate();
  jsa.validate();
  if (!delays.empty()) check_delays(delays);
  if (poisson && repetitions < 1) throw ConfigError("quantum.repetitions must be >= 1");
  if (bootstrap < 100) throw ConfigError("ensemble.bootstrap must be >= 100");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("ensemble.level must lie in (0, 1)");
}

std::vector<double> default_quantum_delays(double sigma_omega, std::size_t points) {
  if (!(sigma_omega > 0.0)) throw DomainError("sigma_omega must be > 0");
  if (points < 2) throw DomainError("need at least two delays");
  const double span = 4.0 / sigma_omega;
  std::vector<double> d(points);
  for (std::size_t i = 0; i < points; ++i)
    d[i] = -span + 2.0 * span * static_cast<double>(i) / static_cast<double>(points - 1);
  d[points / 2] = (points % 2 == 1) ? 0.0 : d[points / 2];
  return d;
}

QuantumDipResult run_quantum_dip(const QuantumDipConfig& cfg) {
  cfg.validate();
  const std::vector<double> delays =
      cfg.delays.empty() ? default_quantum_delays(cfg.jsa.sigma_omega) : cfg.delays;
  QuantumDipResult out;
  out.warning = fock::filter_coverage_warning(cfg.jsa);
  out.model = fit::quantum_model_curve(delays, cfg.params, cfg.jsa);
  out.curve.normalization = (cfg.poisson || cfg.params.scale_k != 1.0)
                                ? CurveNormalization::counts
                                : CurveNormalization::quantum_probability;
  out.curve.points.resize(delays.size());
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const double expected = out.model[i];
    if (!cfg.poisson) {
      out.curve.points[i] = {delays[i], expected, expected, expected};
      continue;
    }
    std::vector<double> counts(cfg.repetitions);
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
      CounterRng rng(cfg.seed, stream_key(streams::kCounts, i), r);
      std::poisson_distribution<long long> draw(expected);
      counts[r] = expected > 0.0 ? static_cast<double>(draw(rng)) : 0.0;
    }
    const double mean = stats::mean(counts);
    stats::ConfidenceInterval ci{mean, mean, cfg.level};
    if (cfg.repetitions >= 2)
      ci = stats::bootstrap_ci(counts, cfg.bootstrap, cfg.level,
                               {cfg.seed, stream_key(streams::kBootstrap, i)});
    out.curve.points[i] = make_point(delays[i], mean, ci);
  }
  out.curve.validate();
  out.derived_visibility = fock::derived_visibility(cfg.params);
  out.curve_visibility = delays.size() >= 2 ? out.curve.visibility()
                                            : std::numeric_limits<double>::quiet_NaN();
  return out;
}

// ---- Sample-size sweep ------------------------------------------------------------

std::vector<MinSamplesRow> run_min_samples_sweep(const ClassicalDipConfig& cfg,
                                                 double rel_halfwidth, double z) {
  cfg.validate();
  std::vector<MinSamplesRow> rows(cfg.delays.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    const EnsembleRecord rec = sample_ensemble(cfg.setup, cfg.delays[i], cfg.pilot,
                                               {cfg.seed, stream_key(streams::kPilot, i)});
    MinSamplesRow& row = rows[i];
    row.delay = cfg.delays[i];
    row.plus = stats::SampleSummary::of(rec.i_plus);
    row.minus = stats::SampleSummary::of(rec.i_minus);
    row.n_plus = stats::min_samples(row.plus, rel_halfwidth, z);
    row.n_minus = stats::min_samples(row.minus, rel_halfwidth, z);
  });
  return rows;
}

// ---- Config-file front end ----------------------------------------------------------

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json interval_json(const stats::ConfidenceInterval& ci) {
  return {{"lo", number_or_null(ci.lo)}, {"hi", number_or_null(ci.hi)}, {"level", ci.level}};
}

std::vector<double> read_delays(const Config& c, const std::string& section,
                                std::vector<double> fallback) {
  if (auto values = c.get_list(section + ".values")) {
    check_delays(*values);
    return *values;
  }
  const auto start = c.get_double(section + ".start");
  const auto stop = c.get_double(section + ".stop");
  const auto step = c.get_double(section + ".step");
  if (!start && !stop && !step) return fallback;
  if (!start || !stop || !step)
    throw ConfigError(c.source() + ": " + section +
                      ": start, stop and step must be given together");
  if (!(*step > 0.0) || !(*stop >= *start))
    throw ConfigError(c.source() + ": " + section + ": need step > 0 and stop >= start");
  const auto count = static_cast<std::size_t>(std::llround((*stop - *start) / *step)) + 1;
  std::vector<double> d(count);
  // On a start that is a whole number of steps, index the grid from zero so
  // that e.g. 2 ms is printed as 0.002 rather than accumulated roundoff.
  const double offset = *start / *step;
  const bool aligned = std::abs(offset - std::round(offset)) < 1e-9;
  for (std::size_t k = 0; k < count; ++k) {
    d[k] = aligned ? (std::round(offset) + static_cast<double>(k)) * *step
                   : *start + static_cast<double>(k) * *step;
    if (std::abs(d[k]) < 1e-9 * *step) d[k] = 0.0;
  }
  return d;
}

std::optional<std::size_t> read_samples(const Config& c, const std::string& key) {
  const auto v = c.get_string(key);
  if (!v || *v == "auto") return std::nullopt;
  std::size_t pos = 0;
  std::size_t n = 0;
  try {
    n = std::stoul(*v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v->size() || n < 2)
    throw ConfigError(c.source() + ": " + key + ": expected 'auto' or an integer >= 2, got '" +
                      *v + "'");
  return n;
}

BlockedArm read_blocked(const Config& c, const std::string& key, BlockedArm fallback) {
  const auto v = c.get_string(key);
  if (!v) return fallback;
  if (*v == "none") return BlockedArm::none;
  if (*v == "plus") return BlockedArm::plus_arm;
  if (*v == "minus") return BlockedArm::minus_arm;
  throw ConfigError(c.source() + ": " + key + ": expected none, plus or minus, got '" + *v + "'");
}

std::string to_string(BlockedArm b) {
  switch (b) {
    case BlockedArm::none:
      return "none";
    case BlockedArm::plus_arm:
      return "plus";
    case BlockedArm::minus_arm:
      return "minus";
  }
  return "none";
}

double read_angle(const Config& c, const std::string& key, double fallback) {
  const auto v = c.get_string(key);
  if (!v) return fallback;
  try {
    return parse_angle(*v);
  } catch (const ConfigError& e) {
    throw ConfigError(c.source() + ": " + key + ": " + e.what());
  }
}

ClassicalSetup read_classical_setup(const Config& c, bool rf_flag) {
  ClassicalSetup s;
  s.pulse.amplitude = c.get_double("pulse.amplitude", s.pulse.amplitude);
  s.pulse.envelope_sigma = c.get_double("pulse.envelope_sigma", s.pulse.envelope_sigma);
  s.pulse.carrier_freq = c.get_double("pulse.carrier_freq", s.pulse.carrier_freq);
  s.amplitude_ratio = c.get_double("pulse.amplitude_ratio", s.amplitude_ratio);
  if (const auto d = c.get_string("phase.distribution")) {
    try {
      s.phases = parse_phase_distribution(*d);
    } catch (const Error& e) {
      throw ConfigError(c.source() + ": phase.distribution: " + e.what());
    }
  }
  if (const auto j = c.get_double("phase.jitter")) s.phases = s.phases.with_jitter(*j);
  s.splitter.t_power = c.get_double("splitter.t_power", s.splitter.t_power);
  s.splitter.phase_error = read_angle(c, "splitter.phase_error", s.splitter.phase_error);
  s.dt = c.get_double("ensemble.dt", 0.0);

  const auto w_start = c.get_double("window.start");
  const auto w_end = c.get_double("window.end");
  if (w_start || w_end) {
    if (!w_start || !w_end) throw ConfigError(c.source() + ": window: start and end go together");
    s.window = std::make_pair(*w_start, *w_end);
  }

  const bool rf = c.get_bool("rf.enabled", false) || rf_flag;
  RfChain chain;
  chain.lo_freq = c.get_double("rf.lo_freq", chain.lo_freq);
  chain.lo_amp = c.get_double("rf.lo_amp", chain.lo_amp);
  chain.cutoff = c.get_double("rf.cutoff", chain.cutoff);
  chain.dt = c.get_double("rf.dt", chain.dt);
  if (rf) s.rf = chain;

  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ConfigError(c.source() + ": " + e.what());
  }
  return s;
}

MziConfig read_mzi(const Config& c) {
  MziConfig m;
  m.ps1.t_power = c.get_double("mzi.ps1_t_power", 0.5);
  m.ps1.phase_error = read_angle(c, "mzi.ps1_phase_error", 0.0);
  m.ps2.t_power = c.get_double("mzi.ps2_t_power", 0.5);
  m.ps2.phase_error = read_angle(c, "mzi.ps2_phase_error", 0.0);
  m.arm_phase = read_angle(c, "mzi.arm_phase", 0.0);
  return m;
}

ClassicalDipConfig read_classical_dip(const Config& c, const RunOptions& opt, std::uint64_t seed) {
  ClassicalDipConfig d;
  d.setup = read_classical_setup(c, opt.rf_chain);
  d.delays = read_delays(c, "delays", default_classical_delays());
  d.samples = read_samples(c, "ensemble.samples");
  d.pilot = c.get_size("ensemble.pilot", d.pilot);
  d.bootstrap = c.get_size("ensemble.bootstrap", d.bootstrap);
  d.level = c.get_double("ensemble.level", d.level);
  d.seed = seed;
  d.validate();
  return d;
}

fock::JsaModel read_jsa(const Config& c) {
  fock::JsaModel jsa;
  const auto sw = c.get_double("quantum.sigma_omega");
  const auto sl = c.get_double("quantum.sigma_lambda");
  const double center = c.get_double("quantum.center_wavelength", 810e-9);
  if (sw && sl)
    throw ConfigError(c.source() + ": quantum: give sigma_omega or sigma_lambda, not both");
  if (sw) {
    jsa.sigma_omega = *sw;
  } else if (sl) {
    jsa.sigma_omega = fock::sigma_omega_from_wavelength(*sl, center);
  } else {
    jsa.sigma_omega = fock::sigma_omega_from_wavelength(0.581e-9, center);
  }
  if (const auto path = c.get_string("quantum.filter")) {
    std::ifstream in(c.resolve_path(*path));
    if (!in) throw ConfigError(c.source() + ": quantum.filter: cannot open " + *path);
    try {
      jsa.filter = fock::FilterTable::read_csv(in);
    } catch (const Error& e) {
      throw ConfigError(c.source() + ": quantum.filter: " + e.what());
    }
  }
  jsa.renormalize = c.get_bool("quantum.renormalize", true);
  try {
    jsa.validate();
  } catch (const DomainError& e) {
    throw ConfigError(c.source() + ": quantum: " + e.what());
  }
  return jsa;
}

fock::QuantumModelParams read_quantum_params(const Config& c) {
  fock::QuantumModelParams p;
  p.t_power = c.get_double("quantum.t_power", p.t_power);
  p.eta = c.get_double("quantum.eta", p.eta);
  p.zeta = c.get_double("quantum.zeta", p.zeta);
  p.scale_k = c.get_double("quantum.scale_k", p.scale_k);
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ConfigError(c.source() + ": quantum: " + e.what());
  }
  return p;
}

// Two numeric columns: a dip curve CSV (tau_s,c_mean,...) or delta_tau_s,counts.
std::vector<fit::CountPoint> read_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path.string());
  std::string line;
  std::vector<fit::CountPoint> points;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    fit::CountPoint p;
    if (!(fields >> p.delta_tau >> p.counts))
      throw ConfigError(path.string() + ": malformed row " + std::to_string(lineno));
    points.push_back(p);
  }
  if (points.empty()) throw ConfigError(path.string() + ": no data rows");
  return points;
}

std::vector<double> read_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path.string());
  std::string line;
  std::vector<double> values;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string first = line.substr(0, line.find(','));
    std::istringstream field(first);
    double v = 0.0;
    if (!(field >> v)) {
      if (lineno == 1) continue;  // header
      throw ConfigError(path.string() + ": malformed row " + std::to_string(lineno));
    }
    values.push_back(v);
  }
  return values;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct Check {
  std::string name;
  bool passed;
  json detail;
};

json checks_json(const std::vector<Check>& checks) {
  json arr = json::array();
  for (const auto& ch : checks) arr.push_back({{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
  return arr;
}

// Optional [expect] assertions. Read before the unknown-key check so that
// only the keys meaningful for the experiment are accepted.
struct Expectations {
  std::map<std::string, double> targets;
  std::optional<double> tolerance;

  static Expectations read(const Config& c, std::initializer_list<const char*> keys) {
    Expectations e;
    for (const char* k : keys)
      if (const auto v = c.get_double(std::string("expect.") + k)) e.targets[k] = *v;
    e.tolerance = c.get_double("expect.tolerance");
    return e;
  }

  // Within the tolerance when one is given, otherwise inside the interval
  // (or within default_tol when there is none).
  void check(const std::string& key, double value,
             const std::optional<stats::ConfidenceInterval>& ci, double default_tol,
             std::vector<Check>& checks) const {
    const auto it = targets.find(key);
    if (it == targets.end()) return;
    json detail = {{"expected", it->second}, {"actual", number_or_null(value)}};
    bool ok = false;
    if (tolerance || !ci) {
      const double t = tolerance.value_or(default_tol);
      ok = std::abs(value - it->second) <= t;
      detail["tolerance"] = t;
    } else {
      ok = ci->contains(it->second);
      detail["interval"] = interval_json(*ci);
    }
    checks.push_back({"expect." + key, ok, detail});
  }

  // Lower bound check.
  void check_min(const std::string& key, double value, std::vector<Check>& checks) const {
    const auto it = targets.find(key);
    if (it == targets.end()) return;
    checks.push_back({"expect." + key, value >= it->second,
                      {{"minimum", it->second}, {"actual", number_or_null(value)}}});
  }
};

struct Prepared {
  std::string kind;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
};

RunOutcome finish(const Prepared& p, json summary, const std::vector<Check>& checks,
                  std::vector<std::filesystem::path> files, std::string text) {
  RunOutcome out;
  out.checks_passed = std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  summary["kind"] = p.kind;
  summary["seed"] = p.seed;
  summary["checks"] = checks_json(checks);
  summary["checks_passed"] = out.checks_passed;
  const auto path = p.dir / (p.kind + ".json");
  write_json(path, summary);
  files.push_back(path);
  out.files = std::move(files);
  out.summary = std::move(text);
  return out;
}

RunOutcome do_classical_dip(const Config& c, const RunOptions& opt, const Prepared& p) {
  const ClassicalDipConfig cfg = read_classical_dip(c, opt, p.seed);
  const auto expect = Expectations::read(c, {"visibility"});
  c.require_all_used();
  const auto r = run_classical_dip(cfg);
  std::vector<Check> checks;
  expect.check("visibility", r.visibility, r.visibility_bootstrap.ci, 0.0, checks);

  const auto csv = p.dir / "classical-dip.csv";
  std::ostringstream os;
  r.curve.write_csv(os);
  write_text(csv, os.str());

  json delays = json::array();
  for (const auto& st : r.delays) {
    delays.push_back({{"tau_s", st.delay},
                      {"samples", st.samples},
                      {"pilot_min_samples", st.pilot_min_samples ? json(*st.pilot_min_samples) : json(nullptr)},
                      {"c", st.correlation.estimate},
                      {"ci", interval_json(st.correlation.ci)},
                      {"std_error", st.correlation.std_error},
                      {"analytic", st.analytic ? json(*st.analytic) : json(nullptr)}});
  }
  json summary = {{"visibility", number_or_null(r.visibility)},
                  {"visibility_ci", interval_json(r.visibility_bootstrap.ci)},
                  {"visibility_std_error", r.visibility_bootstrap.std_error},
                  {"analytic_visibility",
                   r.analytic_visibility ? json(*r.analytic_visibility) : json(nullptr)},
                  {"rf_chain", cfg.setup.rf.has_value()},
                  {"delays", delays}};
  return finish(p, summary, checks, {csv},
                "V = " + format_double(r.visibility) + " [" + format_double(r.visibility_bootstrap.ci.lo) +
                    ", " + format_double(r.visibility_bootstrap.ci.hi) + "]");
}

std::string complementarity_text(const ComplementarityResult& r) {
  return r.model + " complementarity ratio = " + format_double(r.ratio);
}

json complementarity_json(const ComplementarityResult& r) {
  return {{"model", r.model},     {"unblocked", r.unblocked}, {"blocked", r.blocked},
          {"ratio", r.ratio},     {"exact", r.exact},         {"samples", r.samples}};
}

RunOutcome do_complementarity_classical(const Config& c, const RunOptions& opt, const Prepared& p) {
  ClassicalComplementarityConfig cfg;
  cfg.setup = read_classical_setup(c, opt.rf_chain);
  cfg.setup.mzi = read_mzi(c);
  cfg.blocked = read_blocked(c, "mzi.blocked", BlockedArm::minus_arm);
  cfg.delay = c.get_double("complementarity.delay", 0.0);
  cfg.samples = read_samples(c, "ensemble.samples");
  cfg.pilot = c.get_size("ensemble.pilot", cfg.pilot);
  cfg.seed = p.seed;
  const auto expect = Expectations::read(c, {"ratio"});
  c.require_all_used();
  const auto r = run_complementarity_classical(cfg);
  std::vector<Check> checks;
  expect.check("ratio", r.ratio, std::nullopt, 1e-9, checks);
  json summary = complementarity_json(r);
  summary["blocked_arm"] = to_string(cfg.blocked);
  summary["delay_s"] = cfg.delay;
  return finish(p, summary, checks, {}, complementarity_text(r));
}

RunOutcome do_complementarity_quantum(const Config& c, const Prepared& p) {
  QuantumComplementarityConfig cfg;
  cfg.theta = read_angle(c, "quantum.theta", 0.0);
  const std::string mode = c.get_string("quantum.blocked_mode", "2");
  if (mode == "none") {
    cfg.blocked_mode.reset();
  } else if (mode == "1" || mode == "2") {
    cfg.blocked_mode = std::stoi(mode);
  } else {
    throw ConfigError(c.source() + ": quantum.blocked_mode: expected 1, 2 or none, got '" + mode + "'");
  }
  const auto expect = Expectations::read(c, {"ratio"});
  c.require_all_used();
  const auto r = run_complementarity_quantum(cfg);
  std::vector<Check> checks;
  expect.check("ratio", r.ratio, std::nullopt, 1e-9, checks);
  json summary = complementarity_json(r);
  summary["theta_rad"] = cfg.theta;
  summary["blocked_mode"] = cfg.blocked_mode ? json(*cfg.blocked_mode) : json(nullptr);
  return finish(p, summary, checks, {}, complementarity_text(r));
}

RunOutcome do_mzi_scan(const Config& c, const RunOptions& opt, const Prepared& p) {
  MziScanConfig cfg;
  cfg.points = c.get_size("scan.points", cfg.points);
  cfg.classical = read_classical_setup(c, opt.rf_chain);
  cfg.classical.mzi = read_mzi(c);
  c.require_all_used();
  const auto rows = run_mzi_scan(cfg);

  std::ostringstream os;
  os.precision(17);
  os << "theta_rad,coincidence,cos2_half_theta,mean_i_plus,mean_i_minus,classical_c\n";
  double max_dev = 0.0;
  double lo_plus = rows.front().mean_i_plus, hi_plus = lo_plus;
  double lo_minus = rows.front().mean_i_minus, hi_minus = lo_minus;
  for (const auto& r : rows) {
    os << r.theta << ',' << r.quantum << ',' << r.closed_form << ',' << r.mean_i_plus << ','
       << r.mean_i_minus << ',' << r.correlation << '\n';
    max_dev = std::max(max_dev, std::abs(r.quantum - r.closed_form));
    lo_plus = std::min(lo_plus, r.mean_i_plus);
    hi_plus = std::max(hi_plus, r.mean_i_plus);
    lo_minus = std::min(lo_minus, r.mean_i_minus);
    hi_minus = std::max(hi_minus, r.mean_i_minus);
  }
  const auto csv = p.dir / "mzi-scan.csv";
  write_text(csv, os.str());

  std::vector<Check> checks;
  checks.push_back({"quantum_matches_cos2", max_dev <= 1e-12, {{"max_deviation", max_dev}}});
  json summary = {{"points", rows.size()},
                  {"max_quantum_deviation", max_dev},
                  {"classical_i_plus_spread", hi_plus - lo_plus},
                  {"classical_i_minus_spread", hi_minus - lo_minus}};
  return finish(p, summary, checks, {csv},
                "max |P_c(theta) - cos^2(theta/2)| = " + format_double(max_dev));
}

RunOutcome do_quantum_dip(const Config& c, const Prepared& p) {
  QuantumDipConfig cfg;
  cfg.params = read_quantum_params(c);
  cfg.jsa = read_jsa(c);
  cfg.delays = read_delays(c, "delays", {});
  if (cfg.delays.empty())
    cfg.delays = default_quantum_delays(cfg.jsa.sigma_omega, c.get_size("quantum.points", 15));
  cfg.poisson = c.get_bool("quantum.poisson", false);
  cfg.repetitions = c.get_size("quantum.repetitions", cfg.repetitions);
  cfg.bootstrap = c.get_size("ensemble.bootstrap", cfg.bootstrap);
  cfg.level = c.get_double("ensemble.level", cfg.level);
  cfg.seed = p.seed;
  const auto expect = Expectations::read(c, {"visibility"});
  c.require_all_used();
  const auto r = run_quantum_dip(cfg);

  const auto csv = p.dir / "quantum-dip.csv";
  std::ostringstream os;
  r.curve.write_csv(os);
  write_text(csv, os.str());

  std::vector<Check> checks;
  expect.check("visibility", r.derived_visibility, std::nullopt, 1e-9, checks);
  json summary = {{"derived_visibility", r.derived_visibility},
                  {"curve_visibility", number_or_null(r.curve_visibility)},
                  {"normalization", to_string(r.curve.normalization)},
                  {"sigma_omega", cfg.jsa.sigma_omega},
                  {"t_power", cfg.params.t_power},
                  {"eta", cfg.params.eta},
                  {"zeta", cfg.params.zeta},
                  {"scale_k", cfg.params.scale_k},
                  {"poisson", cfg.poisson},
                  {"repetitions", cfg.poisson ? cfg.repetitions : 0},
                  {"model", r.model},
                  {"warning", r.warning ? json(*r.warning) : json(nullptr)}};
  return finish(p, summary, checks, {csv},
                "derived V = " + format_double(r.derived_visibility) +
                    ", curve V = " + format_double(r.curve_visibility));
}

json fit_json(const fit::FitResult& f) {
  json params = json::object();
  for (const auto& [name, fp] : f.params)
    params[name] = {{"value", fp.value},
                    {"free", fp.free},
                    {"std_error", fp.std_error ? json(*fp.std_error) : json(nullptr)}};
  return {{"params", params},
          {"r_squared", number_or_null(f.r_squared)},
          {"residual_norm", f.residual_norm},
          {"converged", f.converged},
          {"iterations", f.iterations},
          {"identifiable", f.identifiable}};
}

RunOutcome do_fit(const Config& c, const Prepared& p) {
  const std::string model = c.get_string("fit.model", "quantum");
  const auto data_path = c.resolve_path(c.require_string("fit.data"));
  fit::LeastSquaresOptions lso;
  lso.max_iterations = c.get_size("fit.max_iterations", lso.max_iterations);
  lso.relative_tolerance = c.get_double("fit.tolerance", lso.relative_tolerance);

  std::vector<fit::CountPoint> points = read_points(data_path);
  std::sort(points.begin(), points.end(),
            [](const fit::CountPoint& a, const fit::CountPoint& b) { return a.delta_tau < b.delta_tau; });
  fit::FitResult result;
  std::vector<double> model_curve;
  std::vector<double> taus;
  for (const auto& pt : points) taus.push_back(pt.delta_tau);

  if (model == "quantum") {
    fit::QuantumFitSetup setup;
    setup.params = read_quantum_params(c);
    setup.jsa = read_jsa(c);
    if (const auto free = c.get_string("fit.free")) {
      setup.free.clear();
      std::istringstream is(*free);
      std::string name;
      while (std::getline(is, name, ',')) {
        name.erase(std::remove_if(name.begin(), name.end(), ::isspace), name.end());
        if (!name.empty()) setup.free.insert(name);
      }
    }
    setup.start_from_params = c.get_bool("fit.start_from_params", false);
    setup.options = lso;
    const auto expect = Expectations::read(c, {"r_squared_min"});
    c.require_all_used();
    result = fit::fit_quantum(points, setup);
    fock::QuantumModelParams fitted = setup.params;
    fitted.scale_k = result.value(fit::kScaleK);
    fitted.zeta = result.value(fit::kZeta);
    fitted.eta = result.value(fit::kEta);
    fock::JsaModel jsa = setup.jsa;
    jsa.sigma_omega = result.value(fit::kSigmaOmega);
    model_curve = fit::quantum_model_curve(taus, fitted, jsa);
    std::vector<Check> checks;
    expect.check_min("r_squared_min", result.r_squared, checks);
    json summary = fit_json(result);
    summary["model"] = model;
    summary["derived_visibility"] = fock::derived_visibility(fitted);
    summary["sigma_lambda_m"] = fock::sigma_wavelength_from_omega(jsa.sigma_omega);
    std::ostringstream os;
    os.precision(17);
    os << "tau_s,data,model\n";
    for (std::size_t i = 0; i < points.size(); ++i)
      os << points[i].delta_tau << ',' << points[i].counts << ',' << model_curve[i] << '\n';
    const auto csv = p.dir / "fit.csv";
    write_text(csv, os.str());
    return finish(p, summary, checks, {csv}, "R^2 = " + format_double(result.r_squared));
  }
  if (model == "classical") {
    fit::ClassicalFitSetup setup;
    setup.envelope_sigma = c.get_double("pulse.envelope_sigma", setup.envelope_sigma);
    setup.fit_sigma = c.get_bool("fit.fit_sigma", false);
    setup.options = lso;
    PhaseDistribution dist = PhaseDistribution::discrete_uniform({0.0, kPi});
    if (const auto d = c.get_string("phase.distribution")) {
      try {
        dist = parse_phase_distribution(*d);
      } catch (const Error& e) {
        throw ConfigError(c.source() + ": phase.distribution: " + e.what());
      }
    }
    const auto expect = Expectations::read(c, {"r_squared_min"});
    c.require_all_used();
    DipCurve curve;
    for (const auto& pt : points) curve.points.push_back({pt.delta_tau, pt.counts, pt.counts, pt.counts});
    result = fit::fit_classical(curve, dist, setup);
    const double v_eff = result.value(fit::kEffectiveVisibility);
    const double sigma = result.value(fit::kEnvelopeSigma);
    for (double t : taus) model_curve.push_back(1.0 - v_eff * std::exp(-t * t / (2.0 * sigma * sigma)));
    std::vector<Check> checks;
    expect.check_min("r_squared_min", result.r_squared, checks);
    json summary = fit_json(result);
    summary["model"] = model;
    std::ostringstream os;
    os.precision(17);
    os << "tau_s,data,model\n";
    for (std::size_t i = 0; i < points.size(); ++i)
      os << points[i].delta_tau << ',' << points[i].counts << ',' << model_curve[i] << '\n';
    const auto csv = p.dir / "fit.csv";
    write_text(csv, os.str());
    return finish(p, summary, checks, {csv}, "R^2 = " + format_double(result.r_squared));
  }
  throw ConfigError(c.source() + ": fit.model: expected quantum or classical, got '" + model + "'");
}

RunOutcome do_min_n(const Config& c, const RunOptions& opt, const Prepared& p) {
  const double rel = c.get_double("min_n.rel_halfwidth", 0.05);
  const double z = c.get_double("min_n.z", 1.96);
  const auto mean = c.get_double("min_n.mean");
  const auto std_dev = c.get_double("min_n.std");
  if (mean || std_dev) {
    if (!mean || !std_dev) throw ConfigError(c.source() + ": min_n: mean and std go together");
    c.require_all_used();
    const std::size_t n = stats::min_samples({*mean, *std_dev, 2}, rel, z);
    json summary = {{"mean", *mean}, {"std", *std_dev}, {"rel_halfwidth", rel}, {"z", z}, {"min_samples", n}};
    return finish(p, summary, {}, {}, "N_min = " + std::to_string(n));
  }

  const ClassicalDipConfig cfg = read_classical_dip(c, opt, p.seed);
  c.require_all_used();
  const auto rows = run_min_samples_sweep(cfg, rel, z);
  std::ostringstream os;
  os.precision(17);
  os << "tau_s,mean_i_plus,std_i_plus,n_min_plus,mean_i_minus,std_i_minus,n_min_minus,n_min\n";
  std::size_t worst = 0;
  for (const auto& r : rows) {
    const std::size_t n = std::max(r.n_plus, r.n_minus);
    worst = std::max(worst, n);
    os << r.delay << ',' << r.plus.mean << ',' << r.plus.std_dev << ',' << r.n_plus << ','
       << r.minus.mean << ',' << r.minus.std_dev << ',' << r.n_minus << ',' << n << '\n';
  }
  const auto csv = p.dir / "min-n.csv";
  write_text(csv, os.str());
  json summary = {{"pilot", cfg.pilot}, {"rel_halfwidth", rel}, {"z", z}, {"max_min_samples", worst}};
  return finish(p, summary, {}, {csv}, "largest N_min over the grid = " + std::to_string(worst));
}

RunOutcome do_bootstrap(const Config& c, const Prepared& p) {
  const auto path = c.resolve_path(c.require_string("bootstrap.data"));
  const std::size_t resamples = c.get_size("bootstrap.resamples", 10000);
  const double level = c.get_double("bootstrap.level", 0.95);
  c.require_all_used();
  const std::vector<double> values = read_values(path);
  if (values.size() < 2) throw ConfigError(path.string() + ": need at least two values");
  const auto ci = stats::bootstrap_ci(values, resamples, level, {p.seed, stream_key(streams::kBootstrap, 0)});
  const double mean = stats::mean(values);
  json summary = {{"count", values.size()}, {"mean", mean}, {"resamples", resamples}, {"ci", interval_json(ci)}};
  return finish(p, summary, {}, {},
                "mean = " + format_double(mean) + " [" + format_double(ci.lo) + ", " + format_double(ci.hi) + "]");
}

}  // namespace

std::string subcommand_for_kind(const std::string& kind) {
  if (kind == "complementarity-classical" || kind == "complementarity-quantum")
    return "complementarity";
  return kind;
}

RunOutcome run_config(const Config& c, const RunOptions& options) {
  Prepared p;
  p.kind = c.require_string("kind");
  static const std::set<std::string> kinds = {
      "classical-dip", "quantum-dip", "complementarity-classical", "complementarity-quantum",
      "mzi-scan",      "fit",         "min-n",                     "bootstrap"};
  if (!kinds.count(p.kind)) throw ConfigError(c.source() + ": kind: unknown experiment '" + p.kind + "'");
  p.seed = options.seed ? *options.seed : c.get_u64("seed", 0);
  if (options.seed) c.get_u64("seed", 0);  // overridden, but still a known key
  const std::string out = c.get_string("output", ".");
  p.dir = options.out_dir.empty() ? c.resolve_path(out) : options.out_dir;

  Config cfg = c;
  if (options.samples) cfg.set("ensemble.samples", *options.samples);
  const bool classical = p.kind == "classical-dip" || p.kind == "complementarity-classical" ||
                         p.kind == "min-n" || p.kind == "mzi-scan";
  if (options.rf_chain && !classical)
    throw ConfigError("--rf-chain applies to classical experiments only");
  if (options.samples && !(p.kind == "classical-dip" || p.kind == "complementarity-classical"))
    throw ConfigError("--samples applies to classical-dip and complementarity only");

  std::filesystem::create_directories(p.dir);
  if (p.kind == "classical-dip") return do_classical_dip(cfg, options, p);
  if (p.kind == "complementarity-classical") return do_complementarity_classical(cfg, options, p);
  if (p.kind == "complementarity-quantum") return do_complementarity_quantum(cfg, p);
  if (p.kind == "mzi-scan") return do_mzi_scan(cfg, options, p);
  if (p.kind == "quantum-dip") return do_quantum_dip(cfg, p);
  if (p.kind == "fit") return do_fit(cfg, p);
  if (p.kind == "min-n") return do_min_n(cfg, options, p);
  return do_bootstrap(cfg, p);
}

}  // namespace homlab::experiments
