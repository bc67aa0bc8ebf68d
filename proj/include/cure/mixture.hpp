#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "cure/gamma.hpp"

namespace cure {

enum class RadialKind { TwoPoint, Gaussian };

/// Spherically symmetric noise Z = R * U with U uniform on the unit sphere
/// and R independent of U. Isotropic: E R^2 = d, so E Z Z^T = I.
struct NoiseLaw {
  RadialKind kind = RadialKind::Gaussian;
  int d = 0;
  // TwoPoint only: R^2 = r1_sq with probability p, r2_sq otherwise.
  double r1_sq = 0.0;
  double r2_sq = 0.0;
  double p = 0.5;
  double mz = 3.0;            // coordinate fourth moment E Z_1^4
  double kappa_excess = 0.0;  // mz - 3

  double radial_m2() const;
  double radial_m4() const;
  bool leptokurtic() const { return kappa_excess > 0.0; }
};

/// Bounded two-point radial law with coordinate excess kurtosis kappa_excess.
/// Uses p = 1/2 when that gives r1_sq > 0; otherwise the p that minimizes
/// r2_sq / r1_sq, which has a closed form.
NoiseLaw make_two_point_radial(int d, double kappa_excess);

/// Standard Gaussian noise. Not leptokurtic (mz = 3).
NoiseLaw make_gaussian_radial(int d);

/// Exact E Z_1^4 = 3 E R^4 / (d (d + 2)).
double coordinate_fourth_moment(const NoiseLaw& noise);

/// X = mu0 + mu * Y + sigma^{1/2} Z with Y a Rademacher label.
struct MixtureParams {
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  NoiseLaw noise;

  int dim() const { return static_cast<int>(mu.size()); }

  // Throws ValidationError on inconsistent sizes, asymmetric or
  // non-positive-definite sigma, or mu == 0.
  void validate() const;

  // Stable 64-bit hash of the numeric content, used as dataset provenance.
  std::uint64_t hash() const;
};

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::string source = "external";  // params hash (hex) for synthetic data
};

struct Dataset {
  Eigen::MatrixXd x;                    // n x d, samples as rows
  std::optional<Eigen::VectorXi> labels;  // +-1
  DatasetMeta meta;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index d() const { return x.cols(); }
  void validate() const;
};

/// Deterministic in (params, n, seed).
Dataset sample(const MixtureParams& params, Eigen::Index n, std::uint64_t seed);

/// Sample only the noise vectors Z (n x d) of a law.
Eigen::MatrixXd sample_noise(const NoiseLaw& noise, Eigen::Index n, std::uint64_t seed);

struct BayesClassifier {
  Gamma gamma_bayes;  // (-mu0^T Sigma^{-1} mu, Sigma^{-1} mu)
};

BayesClassifier bayes_classifier(const MixtureParams& params);

/// Symmetric square root of an SPD matrix. Throws NumericalError otherwise.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& sigma);

/// SplitMix64-derived seed for trial `index` of an experiment seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace cure
