#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "cure/errors.hpp"
#include "cure/eval.hpp"

using namespace cure;

namespace {

MixtureParams instance(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double kappa = 1.0) {
  MixtureParams p;
  p.mu0 = Eigen::VectorXd::Zero(mu.size());
  p.noise = make_two_point_radial(static_cast<int>(mu.size()), kappa);
  p.mu = std::move(mu);
  p.sigma = std::move(sigma);
  return p;
}

// P(Z_1 < -1) for the two-point radial law in d = 3, where U_1 ~ Uniform[-1, 1].
double bayes_risk_d3(const NoiseLaw& law) {
  auto tail = [](double r) { return r <= 1.0 ? 0.0 : (1.0 - 1.0 / r) / 2.0; };
  return law.p * tail(std::sqrt(law.r1_sq)) + (1 - law.p) * tail(std::sqrt(law.r2_sq));
}

}  // namespace

TEST_CASE("classify") {
  const Gamma g(0.0, Eigen::Vector2d(1, 0));
  CHECK(classify(g, Eigen::Vector2d(1, 0)) == 1);
  CHECK(classify(g, Eigen::Vector2d(-1, 0)) == -1);
  CHECK(classify(g, Eigen::Vector2d(0, 5)) == 1);  // tie
  const Gamma c(1.0, Eigen::Vector2d::Zero());
  CHECK(classify(c, Eigen::Vector2d(-100, 3)) == 1);
  CHECK_THROWS_AS(classify(g, Eigen::Vector3d::Zero()), DimensionError);
}

TEST_CASE("empirical misclassification") {
  Dataset ds;
  ds.x.resize(4, 1);
  ds.x << 1, 2, -1, -2;
  ds.labels = Eigen::VectorXi(4);
  *ds.labels << 1, -1, -1, -1;
  const Gamma g(0.0, Eigen::VectorXd::Ones(1));
  const EvalReport r = empirical_misclass(g, ds);
  CHECK(r.misclass_rate == 0.25);
  CHECK(r.sign == 1);
  const EvalReport flipped = empirical_misclass(Gamma(0.0, -Eigen::VectorXd::Ones(1)), ds);
  CHECK(flipped.misclass_rate == 0.25);
  CHECK(flipped.sign == -1);
  CHECK(std::isnan(r.excess_risk));
  CHECK(std::isnan(r.estimation_error));

  Dataset unl = ds;
  unl.labels.reset();
  CHECK_THROWS_AS(empirical_misclass(g, unl), ValidationError);
}

TEST_CASE("sign alignment is exact") {
  const auto p = instance(Eigen::Vector3d(1, 0.5, 0), Eigen::MatrixXd::Identity(3, 3));
  const Dataset ds = sample(p, 3000, 4);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 20; ++k) {
    const Gamma g(nd(rng), Eigen::Vector3d(nd(rng), nd(rng), nd(rng)));
    const EvalReport a = empirical_misclass(g, ds);
    const EvalReport b = empirical_misclass(Gamma(-g.alpha, -g.beta), ds);
    CHECK(a.misclass_rate <= 0.5);
    // Ties (measure zero here) are the only asymmetry.
    CHECK(a.misclass_rate == b.misclass_rate);
  }
}

TEST_CASE("bayes risk against the closed form in three dimensions") {
  const auto p = instance(Eigen::Vector3d(1, 0, 0), Eigen::MatrixXd::Identity(3, 3));
  const double exact = bayes_risk_d3(p.noise);
  const Gamma bayes = bayes_classifier(p).gamma_bayes;
  const McRisk mc = population_misclass_mc(bayes, p, 2000000, 8);
  CHECK(std::abs(mc.rate - exact) < 4 * mc.std_error);
  const Eigen::Index n = 200000;
  const Dataset ds = sample(p, n, 9);
  CHECK(std::abs(empirical_misclass(bayes, ds).misclass_rate - exact) < 3 * std::sqrt(0.25 / n));
}

TEST_CASE("chance level when beta is orthogonal to the separation") {
  const auto p = instance(Eigen::Vector3d(2, 0, 0), Eigen::MatrixXd::Identity(3, 3));
  const Eigen::Index n = 100000;
  const Dataset ds = sample(p, n, 10);
  const EvalReport r = empirical_misclass(Gamma(0.0, Eigen::Vector3d(0, 1, 0)), ds);
  CHECK(std::abs(r.misclass_rate - 0.5) < 3 * std::sqrt(0.25 / n));
}

TEST_CASE("perfect separation") {
  const auto p = instance(Eigen::Vector2d(10, 0), 1e-4 * Eigen::MatrixXd::Identity(2, 2));
  const Dataset ds = sample(p, 1000, 11);
  CHECK(empirical_misclass(bayes_classifier(p).gamma_bayes, ds).misclass_rate == 0.0);
  CHECK(label_misclass(kmeans_baseline(ds, 3), ds).misclass_rate == 0.0);
}

TEST_CASE("population risk") {
  const auto p = instance(Eigen::Vector3d(1, 0.3, 0), Eigen::Vector3d(1, 2, 0.5).asDiagonal());
  const Gamma bayes = bayes_classifier(p).gamma_bayes;
  const McRisk rb = population_misclass_mc(bayes, p, 200000, 12);
  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 20; ++k) {
    const Gamma g(0.2 * nd(rng), Eigen::Vector3d(nd(rng), nd(rng), nd(rng)));
    const McRisk rg = population_misclass_mc(g, p, 200000, 12);
    CHECK(rg.rate >= rb.rate);
    const McRisk ex = paired_excess_risk_mc(g, bayes, p, 200000, 12);
    CHECK(ex.rate >= -3 * ex.std_error);
    CHECK(ex.rate == doctest::Approx(rg.rate - rb.rate).epsilon(1e-12));
  }
  const Gamma scaled(3.7 * bayes.alpha, 3.7 * bayes.beta);
  CHECK(population_misclass_mc(scaled, p, 100000, 5).rate == population_misclass_mc(bayes, p, 100000, 5).rate);
  CHECK_THROWS_AS(population_misclass_mc(bayes, p, 9999, 1), ValidationError);
}

TEST_CASE("pca baseline") {
  SUBCASE("stretched instance picks the stretched axis") {
    const auto p = instance(Eigen::Vector2d(1, 0), Eigen::Vector2d(0.1, 10).asDiagonal());
    const Dataset ds = sample(p, 5000, 14);
    const Gamma g = pca_baseline(ds);
    CHECK(std::abs(g.beta(1)) > 0.99);
    CHECK(empirical_misclass(g, ds).misclass_rate > 0.4);
  }
  SUBCASE("isotropic well separated instance") {
    const auto p = instance(Eigen::Vector3d(3, 0, 0), Eigen::MatrixXd::Identity(3, 3));
    const Dataset ds = sample(p, 5000, 15);
    const Gamma g = pca_baseline(ds);
    CHECK(std::abs(g.beta(0)) > 0.9);
    CHECK(g.beta(0) > 0);
    CHECK(g.beta.norm() == doctest::Approx(1.0));
  }
  SUBCASE("one dimension") {
    Dataset ds;
    ds.x.resize(3, 1);
    ds.x << 1, 2, 6;
    const Gamma g = pca_baseline(ds);
    CHECK(g.beta(0) == 1.0);
    CHECK(g.alpha == doctest::Approx(-3.0));
  }
  SUBCASE("rank zero") {
    Dataset ds;
    ds.x = Eigen::MatrixXd::Ones(5, 2);
    CHECK_THROWS_AS(pca_baseline(ds), ValidationError);
  }
}

TEST_CASE("k-means baseline") {
  SUBCASE("duplicates") {
    Dataset ds;
    ds.x = Eigen::MatrixXd::Zero(10, 2);
    ds.x.bottomRows(3).setOnes();
    const Eigen::VectorXi lab = kmeans_baseline(ds, 1);
    CHECK(lab.size() == 10);
    CHECK(lab.cwiseAbs().minCoeff() == 1);
    CHECK(lab(0) != lab(9));
    Dataset same;
    same.x = Eigen::MatrixXd::Ones(6, 2);
    const Eigen::VectorXi all = kmeans_baseline(same, 1);
    CHECK(all.cwiseAbs().minCoeff() == 1);
  }
  SUBCASE("stretched instance is observed, not asserted") {
    const auto p = instance(Eigen::Vector2d(1, 0), Eigen::Vector2d(0.1, 10).asDiagonal());
    const Dataset ds = sample(p, 5000, 16);
    const double rate = label_misclass(kmeans_baseline(ds, 2), ds).misclass_rate;
    MESSAGE("k-means misclassification on the stretched instance: " << rate);
    CHECK(rate <= 0.5);
  }
  SUBCASE("deterministic per seed") {
    const auto p = instance(Eigen::Vector2d(2, 0), Eigen::MatrixXd::Identity(2, 2));
    const Dataset ds = sample(p, 500, 17);
    CHECK(kmeans_baseline(ds, 4) == kmeans_baseline(ds, 4));
  }
}
