#include "cure/mixture.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "cure/errors.hpp"

namespace cure {

double NoiseLaw::radial_m2() const {
  if (kind == RadialKind::Gaussian) return d;
  return p * r1_sq + (1.0 - p) * r2_sq;
}

double NoiseLaw::radial_m4() const {
  if (kind == RadialKind::Gaussian) return static_cast<double>(d) * (d + 2);
  return p * r1_sq * r1_sq + (1.0 - p) * r2_sq * r2_sq;
}

NoiseLaw make_two_point_radial(int d, double kappa_excess) {
  if (d < 2) throw ValidationError("two-point radial law needs d >= 2");
  if (!(kappa_excess > 0.0) || !std::isfinite(kappa_excess)) {
    throw ValidationError("two-point radial law needs a finite kappa_excess > 0");
  }
  const double dd = d;
  const double m4 = (1.0 + kappa_excess / 3.0) * dd * (dd + 2.0);
  const double s = std::sqrt(m4 - dd * dd);  // sd of R^2

  // With P(R^2 = r1_sq) = q and t = sqrt(q / (1 - q)), matching the first two
  // moments of R^2 gives r1_sq = d - s / t and r2_sq = d + s t.
  double t = 1.0;
  if (dd - s <= 0.0) {
    // Minimizer of (d + s t) / (d - s / t): d t^2 - 2 s t - d = 0.
    t = (s + std::hypot(s, dd)) / dd;
  }
  NoiseLaw law;
  law.kind = RadialKind::TwoPoint;
  law.d = d;
  law.p = t * t / (1.0 + t * t);
  law.r1_sq = dd - s / t;
  law.r2_sq = dd + s * t;
  if (!(law.r1_sq > 0.0)) {
    throw ValidationError("two-point radial law: no feasible radii");
  }
  law.mz = coordinate_fourth_moment(law);
  law.kappa_excess = law.mz - 3.0;
  return law;
}

NoiseLaw make_gaussian_radial(int d) {
  if (d < 1) throw ValidationError("gaussian noise needs d >= 1");
  NoiseLaw law;
  law.kind = RadialKind::Gaussian;
  law.d = d;
  law.mz = 3.0;
  law.kappa_excess = 0.0;
  return law;
}

double coordinate_fourth_moment(const NoiseLaw& noise) {
  if (noise.kind == RadialKind::Gaussian) return 3.0;
  const double dd = noise.d;
  return 3.0 * noise.radial_m4() / (dd * (dd + 2.0));
}

void MixtureParams::validate() const {
  const auto d = mu.size();
  if (d < 1) throw ValidationError("mixture: dimension must be positive");
  if (mu0.size() != d || sigma.rows() != d || sigma.cols() != d) {
    std::ostringstream msg;
    msg << "mixture: inconsistent dimensions (mu: " << d << ", mu0: " << mu0.size()
        << ", sigma: " << sigma.rows() << "x" << sigma.cols() << ")";
    throw ValidationError(msg.str());
  }
  if (noise.d != d) throw ValidationError("mixture: noise dimension differs from mu");
  if (!(mu0.allFinite() && mu.allFinite() && sigma.allFinite())) {
    throw ValidationError("mixture: parameters must be finite");
  }
  if (!(mu.norm() > 0.0)) throw ValidationError("mixture: mu must be nonzero");
  if ((sigma - sigma.transpose()).norm() > 1e-12 * std::max(1.0, sigma.norm())) {
    throw ValidationError("mixture: sigma must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues()(0) > 0.0)) {
    throw ValidationError("mixture: sigma must be positive definite");
  }
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, const double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof bits);
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace

std::uint64_t MixtureParams::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  h = fnv1a(h, mu0.data(), mu0.size());
  h = fnv1a(h, mu.data(), mu.size());
  h = fnv1a(h, sigma.data(), sigma.size());
  const double noise_fields[] = {static_cast<double>(noise.kind == RadialKind::TwoPoint),
                                 static_cast<double>(noise.d), noise.r1_sq, noise.r2_sq, noise.p};
  return fnv1a(h, noise_fields, 5);
}

void Dataset::validate() const {
  if (x.rows() < 1 || x.cols() < 1) throw ValidationError("dataset: empty sample matrix");
  if (!x.allFinite()) throw ValidationError("dataset: non-finite entries");
  if (labels) {
    if (labels->size() != x.rows()) throw ValidationError("dataset: label count differs from n");
    for (Eigen::Index i = 0; i < labels->size(); ++i) {
      if ((*labels)(i) != 1 && (*labels)(i) != -1) {
        throw ValidationError("dataset: labels must be -1 or 1");
      }
    }
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ull * (index + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw NumericalError("symmetric square root: matrix is not positive definite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

namespace {

// Draws rows of Z in place; the generator is advanced identically for every
// row so that the sequence depends only on (law, seed).
void fill_noise(const NoiseLaw& noise, std::mt19937_64& rng, Eigen::MatrixXd& z) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index d = noise.d;
  const double r1 = std::sqrt(noise.r1_sq);
  const double r2 = std::sqrt(noise.r2_sq);
  Eigen::VectorXd g(d);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) g(j) = normal(rng);
    if (noise.kind == RadialKind::Gaussian) {
      z.row(i) = g.transpose();
      continue;
    }
    double norm = g.norm();
    while (norm == 0.0) {
      for (Eigen::Index j = 0; j < d; ++j) g(j) = normal(rng);
      norm = g.norm();
    }
    const double radius = unit(rng) < noise.p ? r1 : r2;
    z.row(i) = (radius / norm) * g.transpose();
  }
}

}  // namespace

Eigen::MatrixXd sample_noise(const NoiseLaw& noise, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("sample: n must be at least 1");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd z(n, noise.d);
  fill_noise(noise, rng, z);
  return z;
}

Dataset sample(const MixtureParams& params, Eigen::Index n, std::uint64_t seed) {
  params.validate();
  if (n < 1) throw ValidationError("sample: n must be at least 1");
  const Eigen::MatrixXd root = symmetric_sqrt(params.sigma);

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXi labels(n);
  for (Eigen::Index i = 0; i < n; ++i) labels(i) = coin(rng) ? 1 : -1;

  Eigen::MatrixXd z(n, params.dim());
  fill_noise(params.noise, rng, z);

  Dataset ds;
  ds.x = z * root;  // root is symmetric, so rows are (root z_i)^T
  ds.x.rowwise() += params.mu0.transpose();
  ds.x += labels.cast<double>() * params.mu.transpose();
  ds.labels = std::move(labels);
  ds.meta.seed = seed;
  std::ostringstream src;
  src << std::hex << params.hash();
  ds.meta.source = src.str();
  return ds;
}

BayesClassifier bayes_classifier(const MixtureParams& params) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(params.sigma);
  if (!lu.isInvertible()) throw ValidationError("bayes classifier: sigma is singular");
  Eigen::VectorXd beta = lu.solve(params.mu);
  const double alpha = -params.mu0.dot(beta);
  return {Gamma(alpha, std::move(beta))};
}

}  // namespace cure
