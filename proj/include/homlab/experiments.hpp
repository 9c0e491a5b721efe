#pragma once

// End-to-end experiments: typed configurations, runners, and the
// config-file front end used by the command line tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "homlab/config.hpp"
#include "homlab/correlator.hpp"
#include "homlab/ensemble.hpp"
#include "homlab/fit.hpp"
#include "homlab/fock.hpp"
#include "homlab/stats.hpp"

namespace homlab::experiments {

/// Key of the phase stream of delay index i (shared by every signal path,
/// so the analytic and heterodyne runs see the same draws).
std::uint64_t stream_key(std::uint64_t domain, std::uint64_t index);

// ---- Classical dip ---------------------------------------------------------------

struct ClassicalDipConfig {
  ClassicalSetup setup;
  std::vector<double> delays;               // s, strictly increasing
  std::optional<std::size_t> samples;       // unset: auto from a pilot run
  std::size_t pilot = 200;
  std::size_t bootstrap = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DelayStats {
  double delay = 0.0;
  std::size_t samples = 0;
  std::optional<std::size_t> pilot_min_samples;  // auto mode only
  stats::BootstrapResult correlation;
  std::optional<double> analytic;  // closed form, when it applies
};

struct ClassicalDipResult {
  DipCurve curve;
  std::vector<DelayStats> delays;
  std::vector<EnsembleRecord> records;
  double visibility = 0.0;
  stats::BootstrapResult visibility_bootstrap;
  std::optional<double> analytic_visibility;
};

ClassicalDipResult run_classical_dip(const ClassicalDipConfig& cfg);

/// -7 ms .. 7 ms in 1 ms steps.
std::vector<double> default_classical_delays();

// ---- Complementarity --------------------------------------------------------------

struct ComplementarityResult {
  std::string model;       // "classical" or "quantum"
  double unblocked = 0.0;  // classical: mean(I+ I-); quantum: coincidence probability
  double blocked = 0.0;
  double ratio = 0.0;
  bool exact = true;
  std::size_t samples = 0;  // random ensemble size; 0 for exact enumeration
};

struct ClassicalComplementarityConfig {
  ClassicalSetup setup;  // setup.mzi describes case A; unset means ideal splitters
  BlockedArm blocked = BlockedArm::minus_arm;
  double delay = 0.0;
  /// Unset: exact enumeration for discrete laws, otherwise auto.
  std::optional<std::size_t> samples;
  std::size_t pilot = 200;
  std::uint64_t seed = 0;
};

/// Ratio of the un-normalized correlations mean(I+ I-) of case B (one arm
/// blocked) and case A (unblocked).
ComplementarityResult run_complementarity_classical(const ClassicalComplementarityConfig& cfg);

struct QuantumComplementarityConfig {
  double theta = 0.0;                // two-photon phase
  std::optional<int> blocked_mode = 2;  // unset: case A against itself
};

ComplementarityResult run_complementarity_quantum(const QuantumComplementarityConfig& cfg);

// ---- Interferometer phase scan ------------------------------------------------------

struct MziScanConfig {
  std::size_t points = 100;  // theta over [0, 2 pi], endpoints included
  /// Classical inputs at zero delay; the arm phase is scanned. Needs a
  /// discrete phase law without jitter (exact expectation).
  ClassicalSetup classical;
};

struct MziScanRow {
  double theta = 0.0;
  double quantum = 0.0;      // Fock-engine coincidence probability
  double closed_form = 0.0;  // cos^2(theta / 2)
  double mean_i_plus = 0.0;
  double mean_i_minus = 0.0;
  double correlation = 0.0;  // normalized classical C
};

std::vector<MziScanRow> run_mzi_scan(const MziScanConfig& cfg);

// ---- Quantum dip ------------------------------------------------------------------

struct QuantumDipConfig {
  fock::QuantumModelParams params;
  fock::JsaModel jsa;
  std::vector<double> delays;  // s; empty: 15 points over +-4 / sigma_omega
  bool poisson = false;
  std::size_t repetitions = 100;
  std::size_t bootstrap = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

struct QuantumDipResult {
  DipCurve curve;
  std::vector<double> model;  // noiseless expectation per delay
  double derived_visibility = 0.0;
  double curve_visibility = 0.0;
  std::optional<std::string> warning;
};

QuantumDipResult run_quantum_dip(const QuantumDipConfig& cfg);

std::vector<double> default_quantum_delays(double sigma_omega, std::size_t points = 15);

// ---- Sample-size sweep ------------------------------------------------------------

struct MinSamplesRow {
  double delay = 0.0;
  stats::SampleSummary plus;
  stats::SampleSummary minus;
  std::size_t n_plus = 0;
  std::size_t n_minus = 0;
};

/// Pilot statistics and the minimum sample count of each port per delay.
std::vector<MinSamplesRow> run_min_samples_sweep(const ClassicalDipConfig& cfg,
                                                 double rel_halfwidth = 0.05, double z = 1.96);

// ---- Config-file front end ----------------------------------------------------------

struct RunOptions {
  std::filesystem::path out_dir;        // empty: the config's `output`, else "."
  std::optional<std::uint64_t> seed;    // overrides the config
  bool rf_chain = false;
  std::optional<std::string> samples;   // "auto" or a count
};

struct RunOutcome {
  std::vector<std::filesystem::path> files;
  std::string summary;                   // human-readable one-liner
  bool checks_passed = true;
};

/// Runs the experiment described by `cfg` (whose `kind` key selects it),
/// writes its CSV and JSON outputs and evaluates the optional [expect]
/// assertions.
RunOutcome run_config(const Config& cfg, const RunOptions& options);

/// Subcommand name accepted for a config kind ("complementarity-classical"
/// and "complementarity-quantum" both run under "complementarity").
std::string subcommand_for_kind(const std::string& kind);

}  // namespace homlab::experiments
