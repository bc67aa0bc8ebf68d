#pragma once

#include <cmath>

#include <Eigen/Core>

namespace cure {

/// Affine embedding x -> alpha + beta^T x. Packed as (alpha, beta) when a
/// flat (d+1)-vector is needed.
struct Gamma {
  double alpha = 0.0;
  Eigen::VectorXd beta;

  Gamma() = default;
  Gamma(double a, Eigen::VectorXd b) : alpha(a), beta(std::move(b)) {}

  static Gamma zero(Eigen::Index d) { return {0.0, Eigen::VectorXd::Zero(d)}; }

  static Gamma unpack(const Eigen::Ref<const Eigen::VectorXd>& v) {
    return {v(0), v.tail(v.size() - 1)};
  }

  Eigen::VectorXd pack() const {
    Eigen::VectorXd v(beta.size() + 1);
    v(0) = alpha;
    v.tail(beta.size()) = beta;
    return v;
  }

  Eigen::Index dim() const { return beta.size(); }

  double embed(const Eigen::Ref<const Eigen::VectorXd>& x) const { return alpha + beta.dot(x); }

  bool all_finite() const { return std::isfinite(alpha) && beta.allFinite(); }
};

}  // namespace cure
