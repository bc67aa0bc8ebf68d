#include "cure/landscape.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "cure/errors.hpp"
#include "cure/pgd.hpp"

namespace cure {

const char* to_string(PointClass c) {
  switch (c) {
    case PointClass::LocalMin: return "LocalMin";
    case PointClass::StrictSaddle: return "StrictSaddle";
    case PointClass::Unclassified: return "Unclassified";
  }
  return "Unclassified";
}

namespace {

struct Whitening {
  Eigen::MatrixXd root;      // Sigma^{1/2}
  Eigen::MatrixXd inv_root;  // Sigma^{-1/2}
  Eigen::VectorXd sigma_inv_mu;
  double mu_norm_sq = 0.0;   // mu^T Sigma^{-1} mu
};

Whitening whiten(const MixtureParams& params) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(params.sigma);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw ValidationError("landscape: sigma must be positive definite");
  }
  const auto& v = eig.eigenvectors();
  const Eigen::VectorXd s = eig.eigenvalues().cwiseSqrt();
  Whitening w;
  w.root = v * s.asDiagonal() * v.transpose();
  w.inv_root = v * s.cwiseInverse().asDiagonal() * v.transpose();
  w.sigma_inv_mu = v * eig.eigenvalues().cwiseInverse().asDiagonal() * v.transpose() * params.mu;
  w.mu_norm_sq = params.mu.dot(w.sigma_inv_mu);
  return w;
}

PointClass decide(double grad_norm, double lambda_min, bool converged, const Tolerances& tol) {
  if (!converged || !(grad_norm <= tol.grad_eps)) return PointClass::Unclassified;
  if (lambda_min > 0.0) return PointClass::LocalMin;
  if (lambda_min <= -tol.eig_eta) return PointClass::StrictSaddle;
  return PointClass::Unclassified;
}

Eigen::VectorXd any_orthogonal(const Eigen::VectorXd& unit) {
  const Eigen::Index d = unit.size();
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < d; ++j) {
    if (std::abs(unit(j)) < std::abs(unit(best))) best = j;
  }
  Eigen::VectorXd e = Eigen::VectorXd::Unit(d, best);
  e -= e.dot(unit) * unit;
  return e.normalized();
}

}  // namespace

MixtureParams whitened_params(const PopulationQuartic& pq) {
  const auto d = pq.mu.size();
  MixtureParams p;
  p.mu0 = Eigen::VectorXd::Zero(d);
  p.mu = pq.mu;
  p.sigma = Eigen::MatrixXd::Identity(d, d);
  p.noise = d >= 2 ? make_two_point_radial(static_cast<int>(d), pq.mz - 3.0) : make_gaussian_radial(1);
  return p;
}

PredictedCriticalSets predicted_critical_sets(const MixtureParams& params, double mz) {
  params.validate();
  if (!(mz > 3.0)) throw ValidationError("landscape: predicted critical sets require mz > 3");
  const Whitening w = whiten(params);
  const double m2 = w.mu_norm_sq;
  const double scale = std::sqrt((1.0 + 1.0 / m2) / (m2 * m2 + 6.0 * m2 + mz));
  PredictedCriticalSets sets;
  Eigen::VectorXd beta_h = scale * w.sigma_inv_mu;
  sets.minimum_anchor = Gamma(-beta_h.dot(params.mu0), beta_h);
  sets.params = params;
  sets.mz = mz;
  return sets;
}

Gamma PredictedCriticalSets::sample_saddle(std::mt19937_64& rng) const {
  const Whitening w = whiten(params);
  const Eigen::Index d = params.dim();
  if (d < 2) throw ValidationError("landscape: saddle manifold is empty for d = 1");
  const Eigen::VectorXd mu_w = (w.inv_root * params.mu).normalized();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(d);
  double norm = 0.0;
  while (norm < 1e-8) {
    for (Eigen::Index j = 0; j < d; ++j) v(j) = normal(rng);
    v -= v.dot(mu_w) * mu_w;
    norm = v.norm();
  }
  const Eigen::VectorXd beta = w.inv_root * (v / (norm * std::sqrt(mz)));
  return {-beta.dot(params.mu0), beta};
}

ExtremeEigenvalues dense_extreme_eigenvalues(const Eigen::MatrixXd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h, Eigen::EigenvaluesOnly);
  ExtremeEigenvalues out;
  if (eig.info() != Eigen::Success) {
    out.converged = false;
    out.diagnostic = "dense eigensolver failed";
    return out;
  }
  out.min = eig.eigenvalues()(0);
  out.max = eig.eigenvalues()(h.rows() - 1);
  return out;
}

namespace {

struct PowerResult {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Dominant eigenpair of shift * I + sign * H. All eigenvalues of that operator
// are nonnegative when shift >= |H|, so the dominant one is the extreme one.
PowerResult power_iteration(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                            Eigen::VectorXd v, double shift, double sign, int max_iters,
                            double abs_tol) {
  PowerResult res;
  v.normalize();
  for (int k = 1; k <= max_iters; ++k) {
    const Eigen::VectorXd hv = apply(v);
    const Eigen::VectorXd w = shift * v + sign * hv;
    const double rayleigh = v.dot(hv);
    res.value = rayleigh;
    res.iterations = k;
    if ((hv - rayleigh * v).norm() <= abs_tol) {
      res.converged = true;
      return res;
    }
    const double wn = w.norm();
    if (wn == 0.0) {
      res.converged = true;
      return res;
    }
    v = w / wn;
  }
  return res;
}

}  // namespace

ExtremeEigenvalues iterative_extreme_eigenvalues(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply, Eigen::Index dim,
    std::uint64_t seed, int max_iters, double tol) {
  std::mt19937_64 rng(seed);
  const Eigen::VectorXd start = sample_uniform_ball(dim, 1.0, rng);

  // Unshifted power iteration: magnitude of the dominant eigenvalue.
  const PowerResult dom = power_iteration(apply, start, 0.0, 1.0, max_iters, tol);
  const double scale = std::max(1.0, std::abs(dom.value));
  const double shift = 1.01 * std::abs(dom.value) + tol;
  const double abs_tol = tol * scale;

  const PowerResult top = power_iteration(apply, start, shift, 1.0, max_iters, abs_tol);
  const PowerResult bottom = power_iteration(apply, start, shift, -1.0, max_iters, abs_tol);

  ExtremeEigenvalues out;
  out.max = top.value;
  out.min = bottom.value;
  out.iterations = dom.iterations + top.iterations + bottom.iterations;
  out.converged = top.converged && bottom.converged;
  if (!out.converged) {
    std::ostringstream msg;
    msg << "power iteration did not reach residual " << abs_tol << " within " << max_iters
        << " products";
    out.diagnostic = msg.str();
  }
  return out;
}

namespace {

ExtremeEigenvalues empirical_spectrum(const EmpiricalObjective& obj, const Gamma& g,
                                      const Tolerances& tol) {
  const Eigen::Index p = obj.d() + 1;
  if (p <= tol.dense_limit) return dense_extreme_eigenvalues(obj.hessian(g));
  auto apply = [&](const Eigen::VectorXd& v) { return obj.hvp(g, v); };
  return iterative_extreme_eigenvalues(apply, p, 0x5eedull, static_cast<int>(10 * p));
}

}  // namespace

CriticalPointReport classify_point(const EmpiricalObjective& obj, const Gamma& g,
                                   const Tolerances& tol, const PredictedCriticalSets* predicted) {
  if (!(tol.grad_eps > 0 && tol.eig_eta > 0)) throw ValidationError("classify: tolerances must be positive");
  CriticalPointReport rep;
  rep.gamma = g;
  rep.grad_norm = obj.gradient(g).norm();
  const ExtremeEigenvalues ev = empirical_spectrum(obj, g, tol);
  rep.lambda_min = ev.min;
  rep.lambda_max = ev.max;
  rep.diagnostic = ev.diagnostic;
  rep.classification = decide(rep.grad_norm, ev.min, ev.converged, tol);
  if (predicted) {
    rep.dist_to_predicted = std::min(minimizer_error(g, predicted->params, predicted->mz),
                                     distance_to_saddle_set(g, predicted->params, predicted->mz));
  } else {
    rep.dist_to_predicted = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

CriticalPointReport classify_point(const PopulationQuartic& pq, const Gamma& g,
                                   const Tolerances& tol) {
  pq.validate();
  if (!(tol.grad_eps > 0 && tol.eig_eta > 0)) throw ValidationError("classify: tolerances must be positive");
  CriticalPointReport rep;
  rep.gamma = g;
  rep.grad_norm = quartic_population_gradient(pq, g).norm();
  const ExtremeEigenvalues ev = dense_extreme_eigenvalues(quartic_population_hessian(pq, g));
  rep.lambda_min = ev.min;
  rep.lambda_max = ev.max;
  rep.diagnostic = ev.diagnostic;
  rep.classification = decide(rep.grad_norm, ev.min, ev.converged, tol);
  if (pq.mu.size() >= 2) {
    const MixtureParams p = whitened_params(pq);
    rep.dist_to_predicted = std::min(minimizer_error(g, p, pq.mz), distance_to_saddle_set(g, p, pq.mz));
  } else {
    rep.dist_to_predicted = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

double distance_to_saddle_set(const Gamma& g, const MixtureParams& params, double mz) {
  if (!(mz > 0.0)) throw ValidationError("landscape: mz must be positive");
  const double to_origin = std::sqrt(g.alpha * g.alpha + g.beta.squaredNorm());
  const Eigen::Index d = params.dim();
  if (d < 2) return to_origin;

  const Whitening w = whiten(params);
  const Eigen::VectorXd& mu = params.mu;
  const Eigen::VectorXd& mu0 = params.mu0;
  const Eigen::MatrixXd& sigma = params.sigma;

  auto objective = [&](const Eigen::VectorXd& b) {
    const double r = g.alpha + b.dot(mu0);
    return r * r + (g.beta - b).squaredNorm();
  };
  // Back onto the manifold: drop the mu component, then rescale to the ellipsoid.
  auto retract = [&](Eigen::VectorXd b) {
    b -= (mu.dot(b) / mu.squaredNorm()) * mu;
    const double q = b.dot(sigma * b);
    if (!(q > 0.0)) return Eigen::VectorXd();
    return Eigen::VectorXd(b / std::sqrt(mz * q));
  };

  const Eigen::VectorXd mu_w = (w.inv_root * mu).normalized();
  // Starting points: whitened projection and plain Euclidean projection.
  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::VectorXd wb = w.root * g.beta;
    wb -= wb.dot(mu_w) * mu_w;
    if (wb.norm() < 1e-12) wb = any_orthogonal(mu_w);
    starts.push_back(w.inv_root * (wb.normalized() / std::sqrt(mz)));
    Eigen::VectorXd eb = retract(g.beta);
    if (eb.size() == 0) eb = retract(any_orthogonal(mu.normalized()));
    starts.push_back(eb);
    // +- each axis of the whitened complement, so every basin gets a start.
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Unit(d, j);
      e -= e.dot(mu_w) * mu_w;
      if (e.norm() < 1e-8) continue;
      e = w.inv_root * (e.normalized() / std::sqrt(mz));
      starts.push_back(e);
      starts.push_back(-e);
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (Eigen::VectorXd b : starts) {
    double phi = objective(b);
    double step = 0.5;
    for (int it = 0; it < 500; ++it) {
      const double r = g.alpha + b.dot(mu0);
      Eigen::VectorXd grad = 2.0 * r * mu0 - 2.0 * (g.beta - b);
      // Tangent projection: normals mu and Sigma b.
      Eigen::MatrixXd normals(d, 2);
      normals.col(0) = mu;
      normals.col(1) = sigma * b;
      const Eigen::Matrix2d gram = normals.transpose() * normals;
      grad -= normals * gram.ldlt().solve(normals.transpose() * grad);
      if (grad.norm() < 1e-13) break;
      bool improved = false;
      for (int ls = 0; ls < 60; ++ls) {
        Eigen::VectorXd cand = retract(b - step * grad);
        if (cand.size() > 0) {
          const double phi_c = objective(cand);
          if (phi_c < phi) {
            b = std::move(cand);
            phi = phi_c;
            improved = true;
            step = std::min(1.0, 2.0 * step);
            break;
          }
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    best = std::min(best, std::sqrt(std::max(0.0, phi)));
  }
  return std::min(to_origin, best);
}

double escape_direction_curvature(const EmpiricalObjective& obj, const Gamma& g,
                                  const MixtureParams& params) {
  const Whitening w = whiten(params);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(obj.d() + 1);
  u.tail(obj.d()) = w.sigma_inv_mu.normalized();
  return u.dot(obj.hvp(g, u));
}

double escape_direction_curvature(const PopulationQuartic& pq, const Gamma& g) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(pq.mu.size() + 1);
  u.tail(pq.mu.size()) = pq.mu.normalized();
  return u.dot(quartic_population_hessian(pq, g) * u);
}

double minimizer_error(const Gamma& g_hat, const MixtureParams& params, double mz) {
  const Eigen::VectorXd anchor = predicted_critical_sets(params, mz).minimum_anchor.pack();
  const Eigen::VectorXd v = g_hat.pack();
  if (v.size() != anchor.size()) throw DimensionError("minimizer_error: dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (double s : {1.0, -1.0}) {
    const double c = std::clamp(s * v.dot(anchor) / anchor.squaredNorm(), 0.5, 2.0);
    best = std::min(best, (s * v - c * anchor).norm());
  }
  return best;
}

double default_saddle_eta(const MixtureParams& params, double mz) {
  const Whitening w = whiten(params);
  const double m2 = w.mu_norm_sq;
  return 0.5 * (1.0 - 3.0 / mz) * m2 * m2 / w.sigma_inv_mu.squaredNorm();
}

Eigen::MatrixXd mc_population_gradients(const MixtureParams& params, const LossSpec& spec,
                                        const Eigen::MatrixXd& gammas, Eigen::Index n_mc,
                                        std::uint64_t seed) {
  const Eigen::Index p = params.dim() + 1;
  if (gammas.rows() != p) throw DimensionError("mc gradients: gammas must have d + 1 rows");
  constexpr Eigen::Index kChunk = 100000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, gammas.cols());
  Eigen::Index done = 0;
  std::uint64_t chunk_id = 0;
  while (done < n_mc) {
    const Eigen::Index m = std::min(kChunk, n_mc - done);
    const Dataset ds = sample(params, m, derive_seed(seed, chunk_id++));
    Eigen::MatrixXd xbar(m, p);
    xbar.col(0).setOnes();
    xbar.rightCols(p - 1) = ds.x;
    Eigen::MatrixXd z = xbar * gammas;
    for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = eval_f_d1(z.data()[k], spec);
    acc.noalias() += xbar.transpose() * z;
    done += m;
  }
  acc /= static_cast<double>(n_mc);
  Eigen::VectorXd mu0_bar(p);
  mu0_bar << 1.0, params.mu0;
  for (Eigen::Index c = 0; c < gammas.cols(); ++c) {
    acc.col(c) += (spec.lambda * gammas.col(c).dot(mu0_bar)) * mu0_bar;
  }
  return acc;
}

}  // namespace cure
