#include "homlab/fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "homlab/errors.hpp"
#include "homlab/stats.hpp"

namespace homlab::fit {

namespace {

double sum_of_squares(std::span<const double> r) {
  std::vector<double> sq(r.size());
  std::transform(r.begin(), r.end(), sq.begin(), [](double v) { return v * v; });
  return stats::pairwise_sum(sq);
}

Eigen::MatrixXd numeric_jacobian(const LeastSquaresProblem& problem, std::span<const double> x,
                                 std::span<const double> typical, std::size_t n_residuals) {
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(n_residuals), static_cast<Eigen::Index>(x.size()));
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(std::abs(x[j]), typical[j]);
    probe[j] = x[j] + h;
    const auto up = problem.residuals(probe);
    probe[j] = x[j] - h;
    const auto down = problem.residuals(probe);
    probe[j] = x[j];
    for (std::size_t i = 0; i < n_residuals; ++i)
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (up[i] - down[i]) / (2.0 * h);
  }
  return jac;
}

// Magnitude used for finite-difference steps when a parameter sits near zero.
std::vector<double> typical_magnitudes(const LeastSquaresProblem& problem,
                                       std::span<const double> x0) {
  std::vector<double> typical(x0.size());
  for (std::size_t j = 0; j < x0.size(); ++j) {
    const double range = problem.upper[j] - problem.lower[j];
    const double from_range = std::isfinite(range) ? 1e-2 * range : 0.0;
    typical[j] = std::max({std::abs(x0[j]), from_range, 1e-300});
  }
  return typical;
}

std::vector<double> clamp_to(std::span<const double> x, const LeastSquaresProblem& problem) {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = std::clamp(out[j], problem.lower[j], problem.upper[j]);
  return out;
}

// Standard errors from the final Jacobian, or nothing when the free
// parameters are not separately identifiable.
std::optional<std::vector<double>> standard_errors(const Eigen::MatrixXd& jac, double objective,
                                                   std::size_t n_residuals) {
  const auto p = static_cast<std::size_t>(jac.cols());
  if (p == 0) return std::vector<double>{};
  if (n_residuals <= p) return std::nullopt;
  Eigen::VectorXd col_norm = jac.colwise().norm();
  if ((col_norm.array() <= 0.0).any()) return std::nullopt;
  const Eigen::MatrixXd scaled = jac * col_norm.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) <= 1e-8 * s(0)) return std::nullopt;
  const double s2 = objective / static_cast<double>(n_residuals - p);
  const Eigen::MatrixXd cov_scaled = (scaled.transpose() * scaled).inverse();
  std::vector<double> se(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    se[j] = std::sqrt(s2 * cov_scaled(jj, jj)) / col_norm(jj);
  }
  return se;
}

}  // namespace

double r_squared(std::span<const double> data, std::span<const double> model) {
  if (data.size() != model.size()) throw ShapeError("r_squared needs equal lengths");
  if (data.size() < 2) throw DomainError("r_squared needs at least two points");
  const double mu = stats::mean(data);
  std::vector<double> res(data.size());
  std::vector<double> dev(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    res[i] = data[i] - model[i];
    dev[i] = data[i] - mu;
  }
  const double ss_tot = sum_of_squares(dev);
  if (!(ss_tot > 0.0)) throw DomainError("R^2 undefined: data have zero variance");
  return 1.0 - sum_of_squares(res) / ss_tot;
}

LeastSquaresSolution solve_least_squares(const LeastSquaresProblem& problem,
                                         std::vector<double> x0,
                                         const LeastSquaresOptions& options) {
  const std::size_t p = x0.size();
  if (problem.lower.size() != p || problem.upper.size() != p)
    throw ShapeError("bounds do not match the parameter count");

  LeastSquaresSolution sol;
  sol.x = clamp_to(x0, problem);
  const auto typical = typical_magnitudes(problem, sol.x);
  auto r = problem.residuals(sol.x);
  const std::size_t n = r.size();
  double f = sum_of_squares(r);
  double lambda = options.initial_damping;

  Eigen::MatrixXd jac;
  for (sol.iterations = 0; sol.iterations < options.max_iterations;) {
    if (f == 0.0) {
      sol.converged = true;
      break;
    }
    ++sol.iterations;
    jac = numeric_jacobian(problem, sol.x, typical, n);
    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd grad = jac.transpose() * rv;

    // Parameters on a bound whose descent direction points outward are held
    // for this iteration; the rest are solved in column-scaled coordinates.
    std::vector<Eigen::Index> active;
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const bool out_low = sol.x[j] <= problem.lower[j] && grad(jj) > 0.0;
      const bool out_high = sol.x[j] >= problem.upper[j] && grad(jj) < 0.0;
      if (!out_low && !out_high) active.push_back(jj);
    }
    const auto q = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd js(static_cast<Eigen::Index>(n), q);
    Eigen::VectorXd scale(q);
    for (Eigen::Index k = 0; k < q; ++k) {
      const double c = jac.col(active[static_cast<std::size_t>(k)]).norm();
      scale(k) = c > 0.0 ? c : 1.0;
      js.col(k) = jac.col(active[static_cast<std::size_t>(k)]) / scale(k);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(js, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const Eigen::VectorXd ur = svd.matrixU().transpose() * rv;
    const double sv_floor = sv.size() > 0 ? sv(0) * 1e-10 : 0.0;

    bool accepted = false;
    bool stalled = false;
    while (!accepted) {
      // residuals are data - model, so J here is -d(model)/dx and the damped
      // Gauss-Newton step is -(J'J + lambda I)^-1 J'r in scaled coordinates.
      Eigen::VectorXd coef(sv.size());
      for (Eigen::Index k = 0; k < sv.size(); ++k)
        coef(k) = sv(k) > sv_floor ? -sv(k) * ur(k) / (sv(k) * sv(k) + lambda) : 0.0;
      const Eigen::VectorXd scaled_step = svd.matrixV() * coef;
      Eigen::VectorXd step = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
      for (Eigen::Index k = 0; k < q; ++k)
        step(active[static_cast<std::size_t>(k)]) = scaled_step(k) / scale(k);
      std::vector<double> trial(p);
      for (std::size_t j = 0; j < p; ++j) trial[j] = sol.x[j] + step(static_cast<Eigen::Index>(j));
      trial = clamp_to(trial, problem);
      const auto r_trial = problem.residuals(trial);
      const double f_trial = sum_of_squares(r_trial);
      if (std::isfinite(f_trial) && f_trial < f) {
        const double change = (f - f_trial) / f;
        sol.x = std::move(trial);
        r = r_trial;
        f = f_trial;
        sol.objective_trace.push_back(f);
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (change < options.relative_tolerance) sol.converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          // No descent direction left inside the bounds: a stationary point.
          stalled = true;
          break;
        }
      }
    }
    if (stalled) {
      sol.converged = true;
      break;
    }
    if (sol.converged) break;
  }

  sol.objective = f;
  jac = numeric_jacobian(problem, sol.x, typical, n);
  // A parameter pinned at a bound has no meaningful linearized error; it is
  // left out of the covariance and reported as NaN.
  std::vector<Eigen::Index> interior;
  for (std::size_t j = 0; j < p; ++j)
    if (sol.x[j] > problem.lower[j] && sol.x[j] < problem.upper[j])
      interior.push_back(static_cast<Eigen::Index>(j));
  Eigen::MatrixXd jac_free(jac.rows(), static_cast<Eigen::Index>(interior.size()));
  for (std::size_t k = 0; k < interior.size(); ++k)
    jac_free.col(static_cast<Eigen::Index>(k)) = jac.col(interior[k]);
  if (const auto se = standard_errors(jac_free, f, n)) {
    sol.std_errors = std::vector<double>(p, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < interior.size(); ++k)
      (*sol.std_errors)[static_cast<std::size_t>(interior[k])] = (*se)[k];
  }
  return sol;
}

// ---- Quantum fit ---------------------------------------------------------------

namespace {

const std::vector<std::string>& quantum_parameter_order() {
  static const std::vector<std::string> order = {kScaleK, kSigmaOmega, kZeta, kEta};
  return order;
}

double guess_sigma_omega(std::span<const CountPoint> sorted) {
  double lo = sorted.front().counts;
  double hi = sorted.front().counts;
  for (const auto& p : sorted) {
    lo = std::min(lo, p.counts);
    hi = std::max(hi, p.counts);
  }
  const double half = 0.5 * (lo + hi);
  double acc = 0.0;
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double a = sorted[i - 1].counts - half;
    const double b = sorted[i].counts - half;
    if (a == b || (a > 0.0) == (b > 0.0)) continue;
    const double w = a / (a - b);
    const double tau = sorted[i - 1].delta_tau + w * (sorted[i].delta_tau - sorted[i - 1].delta_tau);
    acc += std::abs(tau);
    ++crossings;
  }
  double half_width = crossings > 0 ? acc / static_cast<double>(crossings) : 0.0;
  if (!(half_width > 0.0)) {
    const double span = sorted.back().delta_tau - sorted.front().delta_tau;
    half_width = span > 0.0 ? span / 6.0 : 1.0;
  }
  // exp(-2 sigma^2 tau^2) = 1/2 at the half-depth point.
  return std::sqrt(std::log(2.0) / 2.0) / half_width;
}

fock::QuantumModelParams with_values(const fock::QuantumModelParams& base,
                                     const std::vector<std::string>& names,
                                     std::span<const double> x, fock::JsaModel& jsa) {
  fock::QuantumModelParams p = base;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == kScaleK) p.scale_k = x[j];
    else if (names[j] == kSigmaOmega) jsa.sigma_omega = x[j];
    else if (names[j] == kZeta) p.zeta = x[j];
    else if (names[j] == kEta) p.eta = x[j];
  }
  return p;
}

}  // namespace

std::vector<double> quantum_model_curve(std::span<const double> delays,
                                        const fock::QuantumModelParams& params,
                                        const fock::JsaModel& jsa) {
  std::vector<double> out(delays.size());
  for (std::size_t i = 0; i < delays.size(); ++i)
    out[i] = fock::hom_coincidence_from_overlap(fock::g_overlap(jsa, delays[i]), params);
  return out;
}

FitResult fit_quantum(std::span<const CountPoint> data, const QuantumFitSetup& setup) {
  for (const auto& name : setup.free)
    if (std::find(quantum_parameter_order().begin(), quantum_parameter_order().end(), name) ==
        quantum_parameter_order().end())
      throw DomainError("unknown quantum fit parameter '" + name + "'");
  if (data.size() < setup.free.size() + 2)
    throw PreconditionError("fit needs at least two more data points than free parameters");
  setup.jsa.validate();
  if (!(setup.params.t_power > 0.0 && setup.params.t_power < 1.0))
    throw DomainError("t_power must lie in (0, 1)");

  std::vector<CountPoint> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end(), [](const CountPoint& a, const CountPoint& b) {
    return a.delta_tau != b.delta_tau ? a.delta_tau < b.delta_tau : a.counts < b.counts;
  });
  std::vector<double> delays(sorted.size());
  std::vector<double> counts(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    delays[i] = sorted[i].delta_tau;
    counts[i] = sorted[i].counts;
  }
  {
    const auto summary = stats::SampleSummary::of(counts);
    if (!(summary.std_dev > 0.0)) throw DomainError("R^2 undefined: data have zero variance");
  }

  std::vector<std::string> names;
  std::vector<double> x0, lower, upper;
  const double max_counts = *std::max_element(counts.begin(), counts.end());
  for (const auto& name : quantum_parameter_order()) {
    if (!setup.free.contains(name)) continue;
    names.push_back(name);
    if (name == kScaleK) {
      x0.push_back(setup.start_from_params ? setup.params.scale_k : 2.0 * max_counts);
      lower.push_back(1e-12 * std::max(1.0, max_counts));
      upper.push_back(std::numeric_limits<double>::infinity());
    } else if (name == kSigmaOmega) {
      x0.push_back(setup.start_from_params ? setup.jsa.sigma_omega : guess_sigma_omega(sorted));
      lower.push_back(1e-9 * x0.back());
      upper.push_back(std::numeric_limits<double>::infinity());
    } else if (name == kZeta) {
      x0.push_back(setup.start_from_params ? setup.params.zeta : 0.02);
      lower.push_back(0.0);
      upper.push_back(1.0);
    } else {
      x0.push_back(setup.start_from_params ? setup.params.eta : 0.99);
      lower.push_back(0.0);
      upper.push_back(1.0);
    }
  }

  LeastSquaresProblem problem;
  problem.lower = lower;
  problem.upper = upper;
  problem.residuals = [&](std::span<const double> x) {
    fock::JsaModel jsa = setup.jsa;
    const auto p = with_values(setup.params, names, x, jsa);
    auto model = quantum_model_curve(delays, p, jsa);
    for (std::size_t i = 0; i < model.size(); ++i) model[i] = counts[i] - model[i];
    return model;
  };

  const auto sol = solve_least_squares(problem, x0, setup.options);

  fock::JsaModel jsa = setup.jsa;
  const auto best = with_values(setup.params, names, sol.x, jsa);
  const auto model = quantum_model_curve(delays, best, jsa);

  FitResult result;
  result.params[kScaleK] = {best.scale_k, false, std::nullopt};
  result.params[kSigmaOmega] = {jsa.sigma_omega, false, std::nullopt};
  result.params[kZeta] = {best.zeta, false, std::nullopt};
  result.params[kEta] = {best.eta, false, std::nullopt};
  result.params["t_power"] = {best.t_power, false, std::nullopt};
  for (std::size_t j = 0; j < names.size(); ++j) {
    auto& entry = result.params[names[j]];
    entry.free = true;
    if (sol.std_errors && std::isfinite((*sol.std_errors)[j])) entry.std_error = (*sol.std_errors)[j];
  }
  result.identifiable = sol.std_errors.has_value();
  result.r_squared = r_squared(counts, model);
  result.residual_norm = std::sqrt(sol.objective);
  result.converged = sol.converged;
  result.iterations = sol.iterations;
  result.objective_trace = sol.objective_trace;
  return result;
}

// ---- Classical fit -------------------------------------------------------------

FitResult fit_classical(const DipCurve& data, const PhaseDistribution& dist,
                        const ClassicalFitSetup& setup) {
  data.validate();
  const std::size_t n_free = setup.fit_sigma ? 2 : 1;
  if (data.points.size() < std::max<std::size_t>(3, n_free + 2))
    throw PreconditionError("classical fit needs at least three points");
  if (!(setup.envelope_sigma > 0.0)) throw DomainError("envelope sigma must be > 0");

  std::vector<double> taus(data.points.size());
  std::vector<double> values(data.points.size());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    taus[i] = data.points[i].tau;
    values[i] = data.points[i].c_mean;
  }
  {
    const auto summary = stats::SampleSummary::of(values);
    if (!(summary.std_dev > 0.0)) throw DomainError("R^2 undefined: data have zero variance");
  }

  const double v_ideal = analytic_visibility(dist);
  double eps0 = 1.0;
  if (v_ideal > 0.0) {
    const double s2 = std::clamp(data.visibility() / v_ideal, 0.0, 1.0);
    if (s2 > 0.0 && s2 < 1.0) {
      const double s = std::sqrt(s2);
      eps0 = (1.0 - std::sqrt(1.0 - s2)) / s;
    } else if (s2 == 0.0) {
      eps0 = 1e-3;
    }
  }

  LeastSquaresProblem problem;
  problem.lower = {1e-6};
  problem.upper = {1.0};
  std::vector<double> x0 = {eps0};
  if (setup.fit_sigma) {
    problem.lower.push_back(1e-9 * setup.envelope_sigma);
    problem.upper.push_back(std::numeric_limits<double>::infinity());
    x0.push_back(setup.envelope_sigma);
  }
  auto sigma_of = [&](std::span<const double> x) {
    return setup.fit_sigma ? x[1] : setup.envelope_sigma;
  };
  problem.residuals = [&](std::span<const double> x) {
    std::vector<double> r(taus.size());
    const double sigma = sigma_of(x);
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] = values[i] - analytic_classical_dip(taus[i], sigma, dist, x[0]);
    return r;
  };

  const auto sol = solve_least_squares(problem, x0, setup.options);
  std::vector<double> model(taus.size());
  for (std::size_t i = 0; i < model.size(); ++i)
    model[i] = analytic_classical_dip(taus[i], sigma_of(sol.x), dist, sol.x[0]);

  FitResult result;
  result.params[kAmplitudeRatio] = {sol.x[0], true, std::nullopt};
  result.params[kEnvelopeSigma] = {sigma_of(sol.x), setup.fit_sigma, std::nullopt};
  result.params[kEffectiveVisibility] = {mismatch_visibility(v_ideal, sol.x[0]), false,
                                         std::nullopt};
  auto error_of = [&](std::size_t j) -> std::optional<double> {
    if (!sol.std_errors || !std::isfinite((*sol.std_errors)[j])) return std::nullopt;
    return (*sol.std_errors)[j];
  };
  result.params[kAmplitudeRatio].std_error = error_of(0);
  if (setup.fit_sigma) result.params[kEnvelopeSigma].std_error = error_of(1);
  result.identifiable = sol.std_errors.has_value();
  result.r_squared = r_squared(values, model);
  result.residual_norm = std::sqrt(sol.objective);
  result.converged = sol.converged;
  result.iterations = sol.iterations;
  result.objective_trace = sol.objective_trace;
  return result;
}

}  // namespace homlab::fit
