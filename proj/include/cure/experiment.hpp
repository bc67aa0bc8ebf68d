#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cure/landscape.hpp"
#include "cure/loss.hpp"
#include "cure/mixture.hpp"
#include "cure/pgd.hpp"

namespace cure {

/// Ground-truth instance as written in a config. Unset vectors default to
/// mu0 = 0, mu = mu_scale * e1 and Sigma = I at whatever d is requested.
struct InstanceSpec {
  int d = 10;
  std::optional<Eigen::VectorXd> mu0;
  std::optional<Eigen::VectorXd> mu;
  std::optional<Eigen::MatrixXd> sigma;
  double mu_scale = 1.0;
  RadialKind noise = RadialKind::TwoPoint;
  double kappa_excess = 1.0;

  MixtureParams build() const { return build(d); }
  MixtureParams build(int dim) const;
};

/// Partial overrides of the CURE step-size schedule.
struct PgdOverrides {
  std::optional<double> c_pgd;
  std::optional<double> eps;
  std::optional<double> eta;
  std::optional<std::int64_t> max_iters;
};

struct SweepGrid {
  std::vector<Eigen::Index> n;
  std::vector<int> d;
  int trials = 0;
};

struct ExperimentConfig {
  InstanceSpec instance;
  bool has_instance = false;  // an [instance] section was present
  LossSpec loss;
  double target_shift = 0.0;
  PgdOverrides pgd;
  SweepGrid sweep;
  Eigen::Index n = 2000;           // synth sample size
  int landscape_trials = 100;
  int landscape_saddles = 100;
  Eigen::Index eval_n_mc = 1'000'000;
  double fallback_eta = 0.125;     // eta when no instance is known
  std::uint64_t seed = 1;

  void validate() const;
  /// Canonical text form; the hash below is taken over it.
  std::string to_ini() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical instances.
MixtureParams default_instance(int d, double kappa_excess = 1.0);
/// mu = (1, 0), Sigma = diag(0.1, 10): separated along e1, stretched along e2.
MixtureParams stretched_instance(double kappa_excess = 1.0);

struct FitOptions {
  LossSpec loss;
  double target_shift = 0.0;
  PgdOverrides pgd;
  std::uint64_t seed = 0;
  std::optional<MixtureParams> truth;  // used only for the default eta
  double fallback_eta = 0.125;
  bool record_iterates = false;
};

struct FitResult {
  Gamma gamma;
  PgdConfig config;
  PgdTrace trace;
  SmoothnessEstimate smoothness;
  LandscapeConstants constants;
};

/// Smoothness estimate -> default schedule -> perturbed gradient descent.
FitResult fit_cure(const Dataset& data, const FitOptions& opts);

/// Landscape constants used when none are configured: eps is the statistical
/// rate, eta half the quartic saddle curvature of the truth (or the fallback).
LandscapeConstants default_landscape_constants(Eigen::Index n, Eigen::Index d,
                                               const std::optional<MixtureParams>& truth,
                                               double fallback_eta);

struct SweepRow {
  int trial = 0;
  Eigen::Index n = 0;
  int d = 0;
  std::string method = "cure";
  double misclass = 0.0;
  double excess = 0.0;
  double est_error = 0.0;
  std::uint64_t seed = 0;
  std::string error;  // non-empty if this cell failed
};

struct SweepCellSummary {
  Eigen::Index n = 0;
  int d = 0;
  int ok = 0;
  int failed = 0;
  double median_est_error = 0.0;
  double mean_est_error = 0.0;
  double median_misclass = 0.0;
  double mean_misclass = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepCellSummary> cells;
  // Least-squares slope of log(median est_error) against log(n), per d.
  std::vector<std::pair<int, double>> slopes;
};

/// Runs every (d, n, trial) cell: synth -> fit -> eval. Cells are
/// independent; `jobs` worker threads share them and results are stored by
/// cell index, so output does not depend on scheduling.
SweepResult run_sweep(const ExperimentConfig& cfg, int jobs = 1, Eigen::Index mc_samples = 100000);

void write_sweep_csv(const SweepResult& res, std::ostream& out);

double loglog_slope(const std::vector<double>& n, const std::vector<double>& err);

struct LandscapeAudit {
  std::vector<std::pair<std::string, CriticalPointReport>> points;  // (source, report)
  int quartic_local_min = 0;
  int quartic_strict_saddle = 0;
  int quartic_unclassified = 0;
  int empirical_local_min = 0;
  int empirical_strict_saddle = 0;
  int empirical_unclassified = 0;
  int empirical_within_rate = 0;  // minimizer error <= 5 * statistical rate
  double worst_quartic_grad = 0.0;
  double worst_empirical_dist = 0.0;
  std::vector<std::string> warnings;
};

/// Quartic-oracle audit of the whitened instance (anchors, origin, sampled
/// saddles) plus `trials` PGD fits at n = 200 d classified on the empirical
/// objective.
LandscapeAudit run_landscape_audit(const ExperimentConfig& cfg, int trials, int saddles,
                                   int jobs = 1);

}  // namespace cure
