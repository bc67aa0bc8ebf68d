#include "cure/objective.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "cure/errors.hpp"

namespace cure {

namespace {

constexpr Eigen::Index kBlock = 256;

// Sums the columns of `parts` pairwise, in place; returns column 0.
Eigen::VectorXd pairwise_columns(Eigen::MatrixXd& parts) {
  const Eigen::Index m = parts.cols();
  for (Eigen::Index step = 1; step < m; step *= 2) {
    for (Eigen::Index j = 0; j + step < m; j += 2 * step) parts.col(j) += parts.col(j + step);
  }
  return parts.col(0);
}

double pairwise_sum(Eigen::VectorXd& parts) {
  const Eigen::Index m = parts.size();
  for (Eigen::Index step = 1; step < m; step *= 2) {
    for (Eigen::Index j = 0; j + step < m; j += 2 * step) parts(j) += parts(j + step);
  }
  return parts(0);
}

Eigen::Index block_count(Eigen::Index n) { return (n + kBlock - 1) / kBlock; }

}  // namespace

EmpiricalObjective::EmpiricalObjective(const Dataset& data, LossSpec spec, double target_shift)
    : spec_(spec), target_shift_(target_shift) {
  spec_.validate();
  data.validate();
  const Eigen::Index n = data.n();
  const Eigen::Index d = data.d();
  xbar_.resize(n, d + 1);
  xbar_.col(0).setOnes();
  xbar_.rightCols(d) = data.x;

  Eigen::MatrixXd parts(d + 1, block_count(n));
  for (Eigen::Index b = 0; b < parts.cols(); ++b) {
    const Eigen::Index start = b * kBlock;
    const Eigen::Index len = std::min(kBlock, n - start);
    parts.col(b) = xbar_.middleRows(start, len).colwise().sum().transpose();
  }
  mu_bar_ = pairwise_columns(parts) / static_cast<double>(n);
  mu_hat_ = mu_bar_.tail(d);
}

void EmpiricalObjective::check_dim(const Gamma& g) const {
  if (g.beta.size() != d()) {
    std::ostringstream msg;
    msg << "objective: beta has dimension " << g.beta.size() << ", data has " << d();
    throw DimensionError(msg.str());
  }
}

Eigen::VectorXd EmpiricalObjective::embed(const Gamma& g) const {
  check_dim(g);
  Eigen::VectorXd z = xbar_.rightCols(d()) * g.beta;
  z.array() += g.alpha;
  return z;
}

double EmpiricalObjective::penalty_residual(const Gamma& g) const {
  return g.alpha + g.beta.dot(mu_hat_) - target_shift_;
}

double EmpiricalObjective::value(const Gamma& g) const {
  const Eigen::VectorXd z = embed(g);
  const Eigen::Index n = z.size();
  Eigen::VectorXd parts(block_count(n));
  for (Eigen::Index b = 0; b < parts.size(); ++b) {
    const Eigen::Index start = b * kBlock;
    const Eigen::Index end = std::min(n, start + kBlock);
    double s = 0.0;
    for (Eigen::Index i = start; i < end; ++i) s += eval_f(z(i), spec_);
    parts(b) = s;
  }
  const double r = penalty_residual(g);
  return pairwise_sum(parts) / static_cast<double>(n) + 0.5 * spec_.lambda * r * r;
}

ValueGradient EmpiricalObjective::value_and_gradient(const Gamma& g) const {
  const Eigen::VectorXd z = embed(g);
  const Eigen::Index n = z.size();
  Eigen::VectorXd slope(n);
  Eigen::VectorXd vparts(block_count(n));
  for (Eigen::Index b = 0; b < vparts.size(); ++b) {
    const Eigen::Index start = b * kBlock;
    const Eigen::Index end = std::min(n, start + kBlock);
    double s = 0.0;
    for (Eigen::Index i = start; i < end; ++i) {
      const auto vs = eval_f_and_d1(z(i), spec_);
      s += vs.value;
      slope(i) = vs.slope;
    }
    vparts(b) = s;
  }
  Eigen::MatrixXd gparts(d() + 1, vparts.size());
  for (Eigen::Index b = 0; b < gparts.cols(); ++b) {
    const Eigen::Index start = b * kBlock;
    const Eigen::Index len = std::min(kBlock, n - start);
    gparts.col(b).noalias() = xbar_.middleRows(start, len).transpose() * slope.segment(start, len);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double r = penalty_residual(g);
  ValueGradient out;
  out.value = pairwise_sum(vparts) * inv_n + 0.5 * spec_.lambda * r * r;
  out.gradient = pairwise_columns(gparts) * inv_n + (spec_.lambda * r) * mu_bar_;
  return out;
}

Eigen::VectorXd EmpiricalObjective::gradient(const Gamma& g) const {
  return value_and_gradient(g).gradient;
}

Eigen::MatrixXd EmpiricalObjective::hessian(const Gamma& g) const {
  const Eigen::VectorXd z = embed(g);
  const Eigen::Index n = z.size();
  Eigen::VectorXd curv(n);
  for (Eigen::Index i = 0; i < n; ++i) curv(i) = eval_f_d2(z(i), spec_);

  const Eigen::Index nb = block_count(n);
  std::vector<Eigen::MatrixXd> parts(nb);
  for (Eigen::Index b = 0; b < nb; ++b) {
    const Eigen::Index start = b * kBlock;
    const Eigen::Index len = std::min(kBlock, n - start);
    const auto rows = xbar_.middleRows(start, len);
    parts[b].noalias() = rows.transpose() * curv.segment(start, len).asDiagonal() * rows;
  }
  for (Eigen::Index step = 1; step < nb; step *= 2) {
    for (Eigen::Index j = 0; j + step < nb; j += 2 * step) parts[j] += parts[j + step];
  }
  Eigen::MatrixXd h = parts[0] / static_cast<double>(n);
  h.noalias() += spec_.lambda * mu_bar_ * mu_bar_.transpose();
  // Exact symmetry regardless of the product kernel's rounding.
  return 0.5 * (h + h.transpose());
}

Eigen::VectorXd EmpiricalObjective::hvp(const Gamma& g, const Eigen::VectorXd& v) const {
  if (v.size() != d() + 1) throw DimensionError("objective: hvp direction has wrong dimension");
  const Eigen::VectorXd z = embed(g);
  const Eigen::Index n = z.size();
  Eigen::VectorXd w = xbar_ * v;
  for (Eigen::Index i = 0; i < n; ++i) w(i) *= eval_f_d2(z(i), spec_);
  Eigen::MatrixXd parts(d() + 1, block_count(n));
  for (Eigen::Index b = 0; b < parts.cols(); ++b) {
    const Eigen::Index start = b * kBlock;
    const Eigen::Index len = std::min(kBlock, n - start);
    parts.col(b).noalias() = xbar_.middleRows(start, len).transpose() * w.segment(start, len);
  }
  return pairwise_columns(parts) / static_cast<double>(n) +
         (spec_.lambda * mu_bar_.dot(v)) * mu_bar_;
}

void PopulationQuartic::validate() const {
  if (!(mz > 3.0)) throw ValidationError("population quartic: requires mz > 3");
  if (!(mu.size() > 0 && mu.norm() > 0.0)) throw ValidationError("population quartic: mu must be nonzero");
  if (!(lambda >= 1.0)) throw ValidationError("population quartic: requires lambda >= 1");
}

double quartic_population_value(const PopulationQuartic& pq, const Gamma& g) {
  const double a2 = g.alpha * g.alpha;
  const double m = g.beta.dot(pq.mu);
  const double m2 = m * m;
  const double b2 = g.beta.squaredNorm();
  const double second = a2 + m2 + b2;
  const double fourth = a2 * a2 + 6.0 * a2 * (m2 + b2) + m2 * m2 + 6.0 * m2 * b2 + pq.mz * b2 * b2;
  return 0.25 * (fourth - 2.0 * second + 1.0) + 0.5 * pq.lambda * a2;
}

Eigen::VectorXd quartic_population_gradient(const PopulationQuartic& pq, const Gamma& g) {
  const double a2 = g.alpha * g.alpha;
  const double m = g.beta.dot(pq.mu);
  const double b2 = g.beta.squaredNorm();
  Eigen::VectorXd out(g.beta.size() + 1);
  out(0) = g.alpha * (a2 + 3.0 * m * m + 3.0 * b2 + pq.lambda - 1.0);
  out.tail(g.beta.size()) = ((3.0 * a2 + m * m + 3.0 * b2 - 1.0) * m) * pq.mu +
                            (3.0 * a2 + 3.0 * m * m + pq.mz * b2 - 1.0) * g.beta;
  return out;
}

Eigen::MatrixXd quartic_population_hessian(const PopulationQuartic& pq, const Gamma& g) {
  const Eigen::Index d = g.beta.size();
  const double a2 = g.alpha * g.alpha;
  const double m = g.beta.dot(pq.mu);
  const double b2 = g.beta.squaredNorm();
  const auto& mu = pq.mu;
  const auto& beta = g.beta;

  Eigen::MatrixXd h(d + 1, d + 1);
  h(0, 0) = 3.0 * a2 + 3.0 * m * m + 3.0 * b2 + pq.lambda - 1.0;
  const Eigen::VectorXd cross = 6.0 * g.alpha * (m * mu + beta);
  h.col(0).tail(d) = cross;
  h.row(0).tail(d) = cross.transpose();

  Eigen::MatrixXd bb = (3.0 * a2 + 3.0 * m * m + pq.mz * b2 - 1.0) * Eigen::MatrixXd::Identity(d, d);
  bb.noalias() += (3.0 * a2 + 3.0 * m * m + 3.0 * b2 - 1.0) * mu * mu.transpose();
  bb.noalias() += (6.0 * m) * (mu * beta.transpose() + beta * mu.transpose());
  bb.noalias() += (2.0 * pq.mz) * beta * beta.transpose();
  h.bottomRightCorner(d, d) = bb;
  return h;
}

Gamma quartic_global_minimizer(const PopulationQuartic& pq) {
  pq.validate();
  const double m2 = pq.mu.squaredNorm();
  const double scale = std::sqrt((1.0 + 1.0 / m2) / (m2 * m2 + 6.0 * m2 + pq.mz));
  return {0.0, scale * pq.mu};
}

}  // namespace cure
