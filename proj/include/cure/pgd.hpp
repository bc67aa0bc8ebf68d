#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "cure/loss.hpp"
#include "cure/objective.hpp"

namespace cure {

/// Hyperparameters of perturbed gradient descent.
struct PgdConfig {
  Eigen::VectorXd gamma0;
  double ell = 1.0;        // gradient Lipschitz constant
  double rho = 1.0;        // Hessian Lipschitz constant
  double eps_pgd = 1e-3;   // target gradient accuracy; must be <= ell^2 / rho
  double c_pgd = 0.1;
  double delta_pgd = 0.1;  // failure probability
  double delta_cap = 0.25; // bound on objective gap from gamma0
  std::int64_t max_iters = 1'000'000;
  std::uint64_t seed = 0;
  bool record_iterates = true;  // keep gamma_t in every trace row

  void validate() const;
};

/// Quantities computed once from the config before iterating.
struct PgdDerived {
  double chi = 0.0;
  double eta_step = 0.0;
  double r = 0.0;  // perturbation radius
  double g_thres = 0.0;
  double f_thres = 0.0;
  std::int64_t t_thres = 0;  // rounded up
};

PgdDerived derive_params(const PgdConfig& cfg, Eigen::Index d);

/// Objective access for the optimizer. `value_and_gradient` is optional and
/// used in place of two separate calls when present.
struct PgdCallbacks {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<ValueGradient(const Eigen::VectorXd&)> value_and_gradient;

  static PgdCallbacks from(const EmpiricalObjective& obj);
};

/// One iteration (period == 0), or a replay: `repeat` iterations starting at
/// t that reproduce the iterations `period` steps earlier, cyclically.
struct TraceRow {
  std::int64_t t = 0;
  std::int64_t repeat = 1;
  int period = 0;
  Eigen::VectorXd gamma;  // empty unless record_iterates
  double grad_norm = 0.0;
  double value = 0.0;
  bool perturbed = false;
};

enum class PgdOutcome { ReturnedCandidate, MaxItersExceeded };

struct PgdTrace {
  std::vector<TraceRow> iterates;
  PgdOutcome outcome = PgdOutcome::MaxItersExceeded;
  std::int64_t iter_count = 0;
  std::int64_t perturbations = 0;
  PgdDerived derived;
  // Gradient norm of the returned point, recomputed after the run.
  double final_grad_norm = 0.0;
  // True when the returned point was recorded with gradient norm <= g_thres.
  bool certified = false;
};

struct PgdResult {
  Eigen::VectorXd gamma;
  PgdTrace trace;
};

/// Perturbed gradient descent. At step t:
///   if |grad| <= g_thres and t - t_noise > t_thres: remember gamma_t, set
///     t_noise = t and add a uniform draw from the ball of radius r;
///   if t - t_noise == t_thres and value(gamma_t) - value(remembered) > -f_thres:
///     return the remembered point;
///   gamma_{t+1} = gamma_t - eta_step * grad(gamma_t).
/// t_noise starts at -t_thres - 1. Deterministic given the config.
///
/// Between perturbations the iteration is a deterministic map, so once gamma
/// bitwise repeats a state from at most `kMaxCycle` steps earlier every later
/// state is known. The loop then jumps directly to the next step at which one
/// of the two tests can change outcome, and the trace records the skipped
/// steps as one replay row.
///
/// Throws NumericalError if the objective becomes non-finite.
inline constexpr int kMaxCycle = 16;

PgdResult run_pgd(const PgdCallbacks& callbacks, const PgdConfig& cfg);

/// Uniform draw from the closed ball of radius r in R^dim.
Eigen::VectorXd sample_uniform_ball(Eigen::Index dim, double r, std::mt19937_64& rng);

/// CSV `t,grad_norm,value,perturbed`, one row per iteration.
void write_trace_csv(const PgdTrace& trace, std::ostream& out);

/// Smoothness surrogates computed from data.
///
/// ell bounds the Hessian norm: F2 * lambda_max((1/n) sum Xbar Xbar^T) + lambda |mu_bar|^2.
/// rho_base is 2 * F3 * max_u (1/n) sum |u^T Xbar_i|^3 over random unit u.
struct SmoothnessEstimate {
  double ell = 0.0;
  double rho_base = 0.0;
};

SmoothnessEstimate estimate_smoothness(const EmpiricalObjective& obj, std::uint64_t seed,
                                       int directions = 100);

/// The landscape constants entering the step-size schedule.
struct LandscapeConstants {
  double eps = 0.0;
  double eta = 0.0;
};

/// sqrt(d log(n / d) / n).
double statistical_rate(Eigen::Index n, Eigen::Index d);

/// Schedule for CURE: gamma0 = 0, ell = M1, rho = rho_base * max(1, d log(n/d) / sqrt(n)),
/// delta_pgd = n^-11, Delta = 1/4 and
/// eps_pgd = min(sqrt(d log(n/d) / n), ell^2 / rho, eta^2 / rho, eps).
PgdConfig default_config_for_cure(Eigen::Index n, Eigen::Index d, const SmoothnessEstimate& smooth,
                                  const LandscapeConstants& landscape, double c_pgd = 0.1,
                                  std::uint64_t seed = 0);

}  // namespace cure
