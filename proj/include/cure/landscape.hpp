#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Core>

#include "cure/gamma.hpp"
#include "cure/mixture.hpp"
#include "cure/objective.hpp"

namespace cure {

enum class PointClass { LocalMin, StrictSaddle, Unclassified };

const char* to_string(PointClass c);

struct CriticalPointReport {
  Gamma gamma;
  double grad_norm = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  PointClass classification = PointClass::Unclassified;
  double dist_to_predicted = 0.0;  // NaN when no ground truth is attached
  std::string diagnostic;
};

/// grad_eps: largest gradient norm treated as critical. A critical point is a
/// LocalMin when lambda_min > 0 and a StrictSaddle when lambda_min <= -eig_eta;
/// everything else is Unclassified.
struct Tolerances {
  double grad_eps = 1e-3;
  double eig_eta = 1e-3;
  Eigen::Index dense_limit = 200;  // dense eigensolve up to this size
};

/// Critical points of the population loss for a mixture: the minima
/// +-c (-beta_h^T mu0, beta_h) for some c in (1/2, 2), and the saddle set
/// {0} u {(-beta^T mu0, beta) : mu^T beta = 0, beta^T Sigma beta = 1/mz}.
struct PredictedCriticalSets {
  Gamma minimum_anchor;  // c = 1
  double c_low = 0.5;
  double c_high = 2.0;
  MixtureParams params;
  double mz = 0.0;

  /// A point of the saddle manifold built from a random direction.
  Gamma sample_saddle(std::mt19937_64& rng) const;
};

PredictedCriticalSets predicted_critical_sets(const MixtureParams& params, double mz);

/// Whitened mixture (mu0 = 0, Sigma = I) matching a population quartic.
MixtureParams whitened_params(const PopulationQuartic& pq);

struct ExtremeEigenvalues {
  double min = 0.0;
  double max = 0.0;
  bool converged = true;
  int iterations = 0;
  std::string diagnostic;
};

ExtremeEigenvalues dense_extreme_eigenvalues(const Eigen::MatrixXd& h);

/// Shifted power iteration on a symmetric operator. Stops when the residual
/// |Hv - lambda v| drops below tol * max(1, |lambda_dominant|) or after
/// max_iters products per eigenvalue.
ExtremeEigenvalues iterative_extreme_eigenvalues(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply, Eigen::Index dim,
    std::uint64_t seed, int max_iters, double tol = 1e-8);

CriticalPointReport classify_point(const EmpiricalObjective& obj, const Gamma& g,
                                   const Tolerances& tol,
                                   const PredictedCriticalSets* predicted = nullptr);
CriticalPointReport classify_point(const PopulationQuartic& pq, const Gamma& g,
                                   const Tolerances& tol);

/// Distance from g to the saddle set. The manifold part is projected in
/// whitened coordinates and refined by projected gradient in the original
/// metric, with the intercept tied to beta.
double distance_to_saddle_set(const Gamma& g, const MixtureParams& params, double mz);

/// u^T H u with u = (0, Sigma^{-1} mu / |Sigma^{-1} mu|).
double escape_direction_curvature(const EmpiricalObjective& obj, const Gamma& g,
                                  const MixtureParams& params);
/// Same for the quartic, with u = (0, mu / |mu|).
double escape_direction_curvature(const PopulationQuartic& pq, const Gamma& g);

/// min over s = +-1 of |s g_hat - c gamma_anchor|, with c fitted by least
/// squares and clamped to [1/2, 2].
double minimizer_error(const Gamma& g_hat, const MixtureParams& params, double mz);

/// Curvature bound used as the default eta: half of |u^T H u| at the quartic
/// saddle set, (1 - 3/mz) |mu|_{Sigma^-1}^4 / |Sigma^{-1} mu|^2 / 2.
double default_saddle_eta(const MixtureParams& params, double mz);

/// Monte-Carlo population gradient E[Xbar f'(gamma^T Xbar)] + lambda (gamma^T mu0bar) mu0bar
/// for each column of `gammas` (packed), from n_mc fresh samples.
Eigen::MatrixXd mc_population_gradients(const MixtureParams& params, const LossSpec& spec,
                                        const Eigen::MatrixXd& gammas, Eigen::Index n_mc,
                                        std::uint64_t seed);

}  // namespace cure
