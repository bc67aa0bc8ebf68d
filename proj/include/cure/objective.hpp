#pragma once

#include <Eigen/Core>

#include "cure/gamma.hpp"
#include "cure/loss.hpp"
#include "cure/mixture.hpp"

namespace cure {

struct ValueGradient {
  double value;
  Eigen::VectorXd gradient;
};

/// Empirical CURE objective
///
///   L(g) = (1/n) sum_i f(alpha + beta^T X_i) + (lambda/2) (alpha + beta^T mu_hat - shift)^2
///
/// with mu_hat the sample mean. `target_shift` is 2p - 1 for a target with
/// P(+1) = p; zero gives the balanced formulation.
///
/// Per-sample sums are accumulated blockwise and combined pairwise, so the
/// result does not depend on row order beyond ~1e-13 relative.
class EmpiricalObjective {
 public:
  EmpiricalObjective(const Dataset& data, LossSpec spec, double target_shift = 0.0);

  double value(const Gamma& g) const;
  Eigen::VectorXd gradient(const Gamma& g) const;
  ValueGradient value_and_gradient(const Gamma& g) const;
  Eigen::MatrixXd hessian(const Gamma& g) const;
  Eigen::VectorXd hvp(const Gamma& g, const Eigen::VectorXd& v) const;

  // Same, on the packed (alpha, beta) vector.
  double value(const Eigen::VectorXd& packed) const { return value(Gamma::unpack(packed)); }
  ValueGradient value_and_gradient(const Eigen::VectorXd& packed) const {
    return value_and_gradient(Gamma::unpack(packed));
  }

  Eigen::Index n() const { return xbar_.rows(); }
  Eigen::Index d() const { return xbar_.cols() - 1; }
  const LossSpec& spec() const { return spec_; }
  const Eigen::VectorXd& mu_hat() const { return mu_hat_; }
  double target_shift() const { return target_shift_; }
  // Rows (1, X_i).
  const Eigen::MatrixXd& augmented() const { return xbar_; }

 private:
  void check_dim(const Gamma& g) const;
  Eigen::VectorXd embed(const Gamma& g) const;
  double penalty_residual(const Gamma& g) const;

  Eigen::MatrixXd xbar_;
  Eigen::VectorXd mu_hat_;
  Eigen::VectorXd mu_bar_;  // (1, mu_hat)
  LossSpec spec_;
  double target_shift_;
};

/// Population loss E h(alpha + beta^T X) + (lambda/2) alpha^2 under the
/// whitened model (mu0 = 0, Sigma = I), where it is a polynomial in gamma.
struct PopulationQuartic {
  Eigen::VectorXd mu;
  double mz = 4.0;
  double lambda = 1.0;

  // Throws ValidationError unless mz > 3, mu != 0 and lambda >= 1.
  void validate() const;
};

double quartic_population_value(const PopulationQuartic& pq, const Gamma& g);
Eigen::VectorXd quartic_population_gradient(const PopulationQuartic& pq, const Gamma& g);
Eigen::MatrixXd quartic_population_hessian(const PopulationQuartic& pq, const Gamma& g);

/// (0, beta_h) with beta_h = sqrt((1 + 1/|mu|^2) / (|mu|^4 + 6 |mu|^2 + mz)) mu.
Gamma quartic_global_minimizer(const PopulationQuartic& pq);

}  // namespace cure
