// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cure/eval.hpp"
#include "cure/experiment.hpp"
#include "cure/landscape.hpp"
#include "cure/loss.hpp"
#include "cure/objective.hpp"
#include "cure/pgd.hpp"

using namespace cure;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel_diff(double x, double y) {
  return std::abs(x - y) / std::max(1.0, std::max(std::abs(x), std::abs(y)));
}

// 1. Loss correctness.
Outcome loss_correctness() {
  constexpr double kKnotTol = 1e-9, kFdTol = 1e-6, kFdStep = 1e-5;
  bool ok = true;
  double worst_knot = 0, worst_fd = 0;
  int bound_violations = 0;
  std::mt19937_64 rng(2024);
  for (const LossSpec& spec : {LossSpec{}, LossSpec{7.5, 15.0, 1.0}}) {
    for (double k : {spec.a, spec.b, -spec.a, -spec.b}) {
      const double lo = std::nextafter(k, 0.0), hi = std::nextafter(k, 2 * k);
      worst_knot = std::max({worst_knot, rel_diff(eval_f(lo, spec), eval_f(hi, spec)),
                             rel_diff(eval_f_d1(lo, spec), eval_f_d1(hi, spec)),
                             rel_diff(eval_f_d2(lo, spec), eval_f_d2(hi, spec))});
    }
    std::uniform_real_distribution<double> u(-2 * spec.b, 2 * spec.b);
    for (int i = 0; i < 10000;) {
      const double x = u(rng);
      if (std::abs(std::abs(x) - spec.a) < 1e-3 || std::abs(std::abs(x) - spec.b) < 1e-3) continue;
      ++i;
      const double h = kFdStep;
      worst_fd = std::max({worst_fd,
                           rel_diff((eval_f(x + h, spec) - eval_f(x - h, spec)) / (2 * h), eval_f_d1(x, spec)),
                           rel_diff((eval_f_d1(x + h, spec) - eval_f_d1(x - h, spec)) / (2 * h), eval_f_d2(x, spec)),
                           rel_diff((eval_f_d2(x + h, spec) - eval_f_d2(x - h, spec)) / (2 * h), eval_f_d3(x, spec))});
    }
    const DerivBounds b = derivative_bounds(spec);
    if (!(b.F1 <= 2 * spec.a * spec.a * spec.b && b.F2 <= 3 * spec.a * spec.a && b.F3 <= 6 * spec.a)) ++bound_violations;
    for (int i = 0; i <= 100000; ++i) {
      const double x = -10 * spec.b + 20 * spec.b * i / 100000.0;
      const bool out = std::abs(x) >= spec.a;
      if (std::abs(eval_f_d1(x, spec) - eval_h_d1(x)) > (out ? 7 * std::pow(std::abs(x), 3) : 0.0)) ++bound_violations;
      if (std::abs(eval_f_d2(x, spec) - eval_h_d2(x)) > (out ? 9 * x * x : 0.0)) ++bound_violations;
    }
  }
  ok = worst_knot <= kKnotTol && worst_fd <= kFdTol && bound_violations == 0;
  std::ostringstream s;
  s << "knot gap " << worst_knot << ", fd rel err " << worst_fd << ", bound violations " << bound_violations;
  return {ok, s.str()};
}

// 2. Quartic landscape oracle.
Outcome quartic_oracle() {
  constexpr double kGradTol = 1e-10, kEigSlack = 1e-8, kCurvTol = 1e-8, kOriginTol = 1e-12;
  const int d = 10;
  PopulationQuartic pq;
  pq.mu = Eigen::VectorXd::Unit(d, 0);
  pq.mz = 4.0;
  pq.lambda = 1.0;
  const double m2 = pq.mu.squaredNorm();
  const double bound = (2 * m2 * m2 + (pq.mz - 3) * m2) / (m2 * m2 + 6 * m2 + pq.mz);

  double worst_min_grad = 0, worst_lmin = INFINITY;
  const Gamma m = quartic_global_minimizer(pq);
  for (const Gamma& g : {m, Gamma(0.0, -m.beta)}) {
    worst_min_grad = std::max(worst_min_grad, quartic_population_gradient(pq, g).norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(quartic_population_hessian(pq, g), Eigen::EigenvaluesOnly);
    worst_lmin = std::min(worst_lmin, eig.eigenvalues()(0));
  }

  const PredictedCriticalSets sets = predicted_critical_sets(whitened_params(pq), pq.mz);
  std::mt19937_64 rng(7);
  double worst_saddle_grad = 0, worst_curv = 0;
  const double curv_expected = (3 / pq.mz - 1) * m2 * m2;
  for (int k = 0; k < 100; ++k) {
    const Gamma s = sets.sample_saddle(rng);
    worst_saddle_grad = std::max(worst_saddle_grad, quartic_population_gradient(pq, s).norm());
    worst_curv = std::max(worst_curv, std::abs(escape_direction_curvature(pq, s) - curv_expected));
  }
  const Eigen::MatrixXd h0 = quartic_population_hessian(pq, Gamma::zero(d));
  const Eigen::MatrixXd expected = -(Eigen::MatrixXd::Identity(d, d) + pq.mu * pq.mu.transpose());
  const double origin_err = (h0.bottomRightCorner(d, d) - expected).cwiseAbs().maxCoeff();

  const bool ok = worst_min_grad <= kGradTol && worst_lmin >= bound - kEigSlack && worst_saddle_grad <= kGradTol &&
                  worst_curv <= kCurvTol && origin_err <= kOriginTol;
  std::ostringstream s;
  s << "min grad " << worst_min_grad << ", lambda_min " << worst_lmin << " (bound " << bound << "), saddle grad "
    << worst_saddle_grad << ", curvature err " << worst_curv << ", origin block err " << origin_err;
  return {ok, s.str()};
}

FitOptions fit_options(const MixtureParams& truth, std::uint64_t seed) {
  FitOptions fo;
  fo.seed = seed;
  fo.truth = truth;
  return fo;
}

// 3. Saddle escape on the empirical objective.
Outcome saddle_escape() {
  constexpr int kTrials = 100, kNeeded = 90;
  constexpr double kRateMultiple = 5.0;
  const int d = 10;
  const Eigen::Index n = 2000;
  const MixtureParams p = default_instance(d);
  const double rate = statistical_rate(n, d);
  const PredictedCriticalSets sets = predicted_critical_sets(p, p.noise.mz);
  int good = 0, local_min = 0, exhausted = 0;
  std::vector<double> errs;
  for (int t = 0; t < kTrials; ++t) {
    const std::uint64_t seed = derive_seed(3000, t);
    const Dataset ds = sample(p, n, seed);
    const FitResult fit = fit_cure(ds, fit_options(p, seed));
    if (fit.trace.outcome == PgdOutcome::MaxItersExceeded) ++exhausted;
    const EmpiricalObjective obj(ds, LossSpec{});
    Tolerances tol;
    tol.grad_eps = rate;
    tol.eig_eta = default_saddle_eta(p, p.noise.mz);
    const CriticalPointReport rep = classify_point(obj, fit.gamma, tol, &sets);
    const double err = minimizer_error(fit.gamma, p, p.noise.mz);
    errs.push_back(err);
    const bool is_min = rep.classification == PointClass::LocalMin;
    local_min += is_min;
    good += is_min && err <= kRateMultiple * rate;
  }
  std::sort(errs.begin(), errs.end());
  std::ostringstream s;
  s << good << "/" << kTrials << " LocalMin within 5*rate (LocalMin " << local_min << ", budget exhausted "
    << exhausted << ", median err " << errs[errs.size() / 2] << ", max err " << errs.back() << ", 5*rate "
    << kRateMultiple * rate << ")";
  return {good >= kNeeded, s.str()};
}

// 4. Rate scaling.
Outcome rate_scaling() {
  constexpr double kRatioLo = 1.3, kRatioHi = 3.1, kSlopeLo = -0.65, kSlopeHi = -0.35;
  ExperimentConfig cfg;
  cfg.instance.d = 10;
  cfg.sweep.d = {10};
  cfg.sweep.n = {2000, 8000, 32000};
  cfg.sweep.trials = 20;
  cfg.seed = 4000;
  const SweepResult res = run_sweep(cfg, 1, 10000);
  bool ok = res.slopes.size() == 1;
  std::ostringstream s;
  s << "median errors";
  int failed = 0;
  for (const auto& c : res.cells) {
    s << " " << c.median_est_error;
    failed += c.failed;
  }
  for (std::size_t i = 1; i < res.cells.size(); ++i) {
    const double ratio = res.cells[i - 1].median_est_error / res.cells[i].median_est_error;
    s << (i == 1 ? "; ratios " : " ") << ratio;
    ok = ok && ratio >= kRatioLo && ratio <= kRatioHi;
  }
  const double slope = res.slopes.empty() ? NAN : res.slopes[0].second;
  s << "; slope " << slope << "; failed cells " << failed;
  ok = ok && slope >= kSlopeLo && slope <= kSlopeHi && failed == 0;
  return {ok, s.str()};
}

// 5. Stretched mixture.
Outcome stretched_mixture() {
  constexpr double kPcaAlign = 0.99, kPcaRate = 0.40, kCureSlack = 0.03;
  constexpr Eigen::Index kMc = 1000000;
  const MixtureParams p = stretched_instance();
  const Dataset ds = sample(p, 5000, 5000);
  const Gamma pca = pca_baseline(ds);
  const double align = std::abs(pca.beta(1)) / pca.beta.norm();
  const double pca_rate = empirical_misclass(pca, ds).misclass_rate;
  const FitResult fit = fit_cure(ds, fit_options(p, 5001));
  const Gamma bayes = bayes_classifier(p).gamma_bayes;
  const McRisk bayes_risk = population_misclass_mc(bayes, p, kMc, 5002);
  const McRisk cure_risk = population_misclass_mc(fit.gamma, p, kMc, 5002);
  const double cure_emp = empirical_misclass(fit.gamma, ds).misclass_rate;
  const bool ok = align > kPcaAlign && pca_rate > kPcaRate && cure_risk.rate <= bayes_risk.rate + kCureSlack &&
                  cure_emp <= bayes_risk.rate + kCureSlack;
  std::ostringstream s;
  s << "PCA |<v,e2>| " << align << ", PCA rate " << pca_rate << ", CURE rate " << cure_risk.rate << " (sample "
    << cure_emp << "), MC Bayes " << bayes_risk.rate;
  return {ok, s.str()};
}

// 6. Quadratic excess risk.
Outcome quadratic_excess() {
  constexpr Eigen::Index kMc = 40000000;
  const MixtureParams p = default_instance(3);
  const Gamma bayes = bayes_classifier(p).gamma_bayes;
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(4);
  dir(0) = 1;
  dir(2) = 1;
  dir.normalize();
  std::vector<double> excess;
  std::ostringstream s;
  s << "excess";
  for (double eps : {0.05, 0.1, 0.2}) {
    const Gamma g = Gamma::unpack(bayes.pack() + eps * dir);
    const McRisk r = paired_excess_risk_mc(g, bayes, p, kMc, 6000);
    excess.push_back(r.rate);
    s << " " << r.rate << "(+-" << r.std_error << ")";
  }
  bool ok = true;
  s << "; ratios";
  for (std::size_t i = 1; i < excess.size(); ++i) {
    const double ratio = excess[i] / excess[i - 1];
    s << " " << ratio;
    ok = ok && ratio >= 2.0 && ratio <= 8.0;
  }
  return {ok, s.str()};
}

// 7. Optimizer fidelity on the analytic strict saddle.
Outcome optimizer_fidelity() {
  constexpr int kSeeds = 100, kNeeded = 95;
  PgdCallbacks cb;
  cb.value = [](const Eigen::VectorXd& g) {
    return 0.5 * (g(0) * g(0) - g(1) * g(1)) + 0.25 * std::pow(g(1), 4);
  };
  cb.gradient = [](const Eigen::VectorXd& g) {
    Eigen::VectorXd out(2);
    out << g(0), -g(1) + std::pow(g(1), 3);
    return out;
  };
  int escaped = 0, uncertified = 0, irreproducible = 0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    PgdConfig cfg;
    cfg.gamma0 = Eigen::VectorXd::Zero(2);
    cfg.ell = 4.0;
    cfg.rho = 6.0;
    cfg.eps_pgd = 1e-2;
    cfg.delta_pgd = 0.1;
    cfg.max_iters = 100'000'000;
    cfg.seed = derive_seed(7000, seed);
    const PgdResult a = run_pgd(cb, cfg);
    const PgdResult b = run_pgd(cb, cfg);
    std::ostringstream ta, tb;
    write_trace_csv(a.trace, ta);
    write_trace_csv(b.trace, tb);
    irreproducible += ta.str() != tb.str() || a.gamma != b.gamma;
    const double g = cb.gradient(a.gamma).norm();
    const bool certified = g <= a.trace.derived.g_thres;
    uncertified += !certified;
    escaped += certified && std::abs(a.gamma(1) * a.gamma(1) - 1) < 1e-3;
  }
  std::ostringstream s;
  s << escaped << "/" << kSeeds << " escaped with |grad| <= g_thres, uncertified " << uncertified
    << ", irreproducible " << irreproducible;
  return {escaped >= kNeeded && uncertified == 0 && irreproducible == 0, s.str()};
}

// 8. Empirical gradient concentration.
Outcome gradient_concentration() {
  constexpr int kPoints = 100, kTrials = 100, kNeeded = 95;
  constexpr double kRateMultiple = 5.0, kRadius = 3.0;
  constexpr Eigen::Index kMc = 1000000;
  const int d = 10;
  const Eigen::Index n = 200 * d;
  const MixtureParams p = default_instance(d);
  const LossSpec spec;
  std::mt19937_64 rng(8000);
  Eigen::MatrixXd gammas(d + 1, kPoints);
  for (int k = 0; k < kPoints; ++k) gammas.col(k) = sample_uniform_ball(d + 1, kRadius, rng);
  const Eigen::MatrixXd pop = mc_population_gradients(p, spec, gammas, kMc, 8001);
  const double threshold = kRateMultiple * statistical_rate(n, d);
  int within = 0;
  std::vector<double> sups;
  for (int t = 0; t < kTrials; ++t) {
    const Dataset ds = sample(p, n, derive_seed(8002, t));
    const EmpiricalObjective obj(ds, spec);
    double sup = 0;
    for (int k = 0; k < kPoints; ++k) {
      sup = std::max(sup, (obj.value_and_gradient(Eigen::VectorXd(gammas.col(k))).gradient - pop.col(k)).norm());
    }
    sups.push_back(sup);
    within += sup <= threshold;
  }
  std::sort(sups.begin(), sups.end());
  std::ostringstream s;
  s << within << "/" << kTrials << " trials with sup deviation <= " << threshold << " (median sup " << sups[kTrials / 2]
    << ", 95th percentile " << sups[94] << ")";
  return {within >= kNeeded, s.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"loss correctness", loss_correctness},
      {"quartic landscape oracle", quartic_oracle},
      {"saddle escape", saddle_escape},
      {"rate scaling", rate_scaling},
      {"stretched mixture", stretched_mixture},
      {"quadratic excess risk", quadratic_excess},
      {"optimizer fidelity", optimizer_fidelity},
      {"gradient concentration", gradient_concentration},
  };
  const std::vector<double> budgets = {5, 5, 300, 900, 60, 120, 30, 300};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= budgets[i];
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("[%s] %d %s: %s; %.1f s (budget %.0f s)\n", pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                out.detail.c_str(), secs, budgets[i]);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
