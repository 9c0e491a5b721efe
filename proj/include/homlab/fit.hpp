#pragma once

// Bounded damped Gauss-Newton fits of the quantum coincidence model and of
// the classical dip with amplitude mismatch.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "homlab/correlator.hpp"
#include "homlab/fock.hpp"

namespace homlab::fit {

struct FitParameter {
  double value = 0.0;
  bool free = false;
  std::optional<double> std_error;  // absent when fixed, on a bound or not identifiable
};

struct FitResult {
  std::map<std::string, FitParameter> params;
  double r_squared = 0.0;
  double residual_norm = 0.0;  // sqrt of the residual sum of squares
  bool converged = false;
  std::size_t iterations = 0;
  /// False when the Jacobian of the free parameters is rank deficient at the
  /// optimum: the data then pin down only combinations of them.
  bool identifiable = true;
  std::vector<double> objective_trace;  // objective after every accepted step

  double value(const std::string& name) const { return params.at(name).value; }
};

/// 1 - sum (data - model)^2 / sum (data - mean(data))^2.
double r_squared(std::span<const double> data, std::span<const double> model);

// ---- Generic bounded least squares -------------------------------------------

struct LeastSquaresOptions {
  std::size_t max_iterations = 200;
  double relative_tolerance = 1e-10;
  double initial_damping = 1e-3;
};

struct LeastSquaresProblem {
  /// Residuals (data - model) for a parameter vector.
  std::function<std::vector<double>(std::span<const double>)> residuals;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct LeastSquaresSolution {
  std::vector<double> x;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
  /// Absent when the free parameters are not separately identifiable; NaN
  /// for a parameter that ended on a bound.
  std::optional<std::vector<double>> std_errors;
};

/// Levenberg-style damped Gauss-Newton: steps solve
/// (J'J + lambda diag(J'J)) dx = -J'r, are projected onto the bounds and
/// accepted only if they lower the objective. A parameter on a bound is held
/// for an iteration when the descent direction points out of the box. lambda is divided by 10 after an
/// accepted step and multiplied by 10 after a rejected one. Stops when the
/// relative objective change of an accepted step is below the tolerance.
LeastSquaresSolution solve_least_squares(const LeastSquaresProblem& problem,
                                         std::vector<double> x0,
                                         const LeastSquaresOptions& options = {});

// ---- Quantum coincidence model -------------------------------------------------

struct CountPoint {
  double delta_tau = 0.0;  // s
  double counts = 0.0;
};

/// Names accepted in the free set.
inline constexpr const char* kScaleK = "K";
inline constexpr const char* kSigmaOmega = "sigma_omega";
inline constexpr const char* kZeta = "zeta";
inline constexpr const char* kEta = "eta";

struct QuantumFitSetup {
  fock::QuantumModelParams params;  // values of fixed parameters (t_power always fixed)
  fock::JsaModel jsa;
  std::set<std::string> free = {kScaleK, kSigmaOmega};
  /// Use the supplied values of free parameters as the starting point
  /// instead of the data-driven guesses.
  bool start_from_params = false;
  LeastSquaresOptions options;
};

/// Minimizes sum (counts - hom_coincidence_noisy)^2 over the free parameters.
/// Bounds: K > 0, sigma_omega > 0, zeta and eta in [0, 1].
/// Default starting point: K = 2 max(counts), sigma_omega from the dip
/// half-width, zeta = 0.02, eta = 0.99.
FitResult fit_quantum(std::span<const CountPoint> data, const QuantumFitSetup& setup);

/// The setup's model evaluated over the given delays.
std::vector<double> quantum_model_curve(std::span<const double> delays,
                                        const fock::QuantumModelParams& params,
                                        const fock::JsaModel& jsa);

// ---- Classical dip with amplitude mismatch -------------------------------------

inline constexpr const char* kAmplitudeRatio = "amplitude_ratio";
inline constexpr const char* kEnvelopeSigma = "envelope_sigma";
inline constexpr const char* kEffectiveVisibility = "effective_visibility";

struct ClassicalFitSetup {
  double envelope_sigma = 1e-3;  // s; starting value when co-fitted
  bool fit_sigma = false;
  LeastSquaresOptions options;
};

/// Fits C(tau) = 1 - V (2 eps / (1 + eps^2))^2 exp(-tau^2 / (2 sigma^2)),
/// eps = A2/A1 reported in (0, 1] (the model is symmetric under eps -> 1/eps).
/// The derived effective visibility is reported as a fixed parameter.
FitResult fit_classical(const DipCurve& data, const PhaseDistribution& dist,
                        const ClassicalFitSetup& setup = {});

}  // namespace homlab::fit
