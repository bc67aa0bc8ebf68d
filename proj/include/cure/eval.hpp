#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "cure/gamma.hpp"
#include "cure/mixture.hpp"

namespace cure {

/// sgn(alpha + beta^T x), with sgn(0) = +1.
int classify(const Gamma& g, const Eigen::Ref<const Eigen::VectorXd>& x);

struct EvalReport {
  double misclass_rate = 0.0;  // in [0, 1/2] after sign alignment
  double excess_risk;          // NaN without a known Bayes risk
  int sign = 1;                // alignment attaining the minimum
  double estimation_error;     // NaN without ground truth
  EvalReport();
};

/// Fraction of mislabeled samples, minimized over a global sign flip.
/// Throws ValidationError if the dataset carries no labels.
EvalReport empirical_misclass(const Gamma& g, const Dataset& ds);

/// Same for a vector of predicted +-1 labels.
EvalReport label_misclass(const Eigen::VectorXi& predicted, const Dataset& ds);

struct McRisk {
  double rate = 0.0;
  double std_error = 0.0;
  int sign = 1;
};

/// Monte-Carlo estimate of the population misclassification rate (up to sign).
/// Requires n_mc >= 10^4. The same seed reuses the same draws.
McRisk population_misclass_mc(const Gamma& g, const MixtureParams& params, Eigen::Index n_mc,
                              std::uint64_t seed);

/// R(g) - R(reference) estimated on common draws, with the standard error of
/// the paired difference.
McRisk paired_excess_risk_mc(const Gamma& g, const Gamma& reference, const MixtureParams& params,
                             Eigen::Index n_mc, std::uint64_t seed);

/// Top principal direction v of the centered data, sign-normalized so its
/// first nonzero entry is positive; returns (-v^T xbar, v).
Gamma pca_baseline(const Dataset& ds);

/// Lloyd's algorithm with k = 2, k-means++ seeding and 50 restarts. Returns
/// +-1 cluster labels of the lowest-inertia run.
Eigen::VectorXi kmeans_baseline(const Dataset& ds, std::uint64_t seed, int restarts = 50);

}  // namespace cure
