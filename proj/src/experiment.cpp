#include "cure/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/LU>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cure/csv.hpp"
#include "cure/errors.hpp"
#include "cure/eval.hpp"

namespace cure {

namespace pt = boost::property_tree;

MixtureParams InstanceSpec::build(int dim) const {
  MixtureParams p;
  p.mu0 = mu0 ? *mu0 : Eigen::VectorXd::Zero(dim);
  p.mu = mu ? *mu : Eigen::VectorXd(mu_scale * Eigen::VectorXd::Unit(dim, 0));
  p.sigma = sigma ? *sigma : Eigen::MatrixXd::Identity(dim, dim);
  if (p.mu0.size() != dim || p.mu.size() != dim || p.sigma.rows() != dim) {
    std::ostringstream msg;
    msg << "instance: explicit mu0/mu/sigma do not match d = " << dim;
    throw ValidationError(msg.str());
  }
  p.noise = noise == RadialKind::TwoPoint ? make_two_point_radial(dim, kappa_excess)
                                          : make_gaussian_radial(dim);
  p.validate();
  return p;
}

MixtureParams default_instance(int d, double kappa_excess) {
  InstanceSpec spec;
  spec.kappa_excess = kappa_excess;
  return spec.build(d);
}

MixtureParams stretched_instance(double kappa_excess) {
  MixtureParams p;
  p.mu0 = Eigen::VectorXd::Zero(2);
  p.mu = Eigen::Vector2d(1.0, 0.0);
  p.sigma = Eigen::Vector2d(0.1, 10.0).asDiagonal();
  p.noise = make_two_point_radial(2, kappa_excess);
  p.validate();
  return p;
}

namespace {

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      throw ValidationError("config: " + key + ": not a number: '" + cell + "'");
    }
    if (cell.find_first_not_of(" \t", used) != std::string::npos) {
      throw ValidationError("config: " + key + ": not a number: '" + cell + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("config: " + key + " is empty");
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class T>
T get_number(const pt::ptree& tree, const std::string& key, T fallback) {
  auto node = tree.get_optional<std::string>(key);
  if (!node) return fallback;
  auto vals = parse_list(key, *node);
  if (vals.size() != 1) throw ValidationError("config: " + key + " must be a single value");
  if constexpr (std::is_integral_v<T>) {
    if (vals[0] != std::floor(vals[0])) throw ValidationError("config: " + key + " must be an integer");
  }
  return static_cast<T>(vals[0]);
}

std::string join(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v(i));
  return s;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  static const std::vector<std::string> known = {"instance", "loss", "pgd", "sweep", "data", "landscape", "eval", "run"};
  for (const auto& section : tree) {
    if (std::find(known.begin(), known.end(), section.first) == known.end()) {
      throw ValidationError("config: unknown section [" + section.first + "]");
    }
  }

  ExperimentConfig cfg;
  if (auto inst = tree.get_child_optional("instance")) {
    cfg.has_instance = true;
    auto& s = cfg.instance;
    s.d = get_number<int>(*inst, "d", s.d);
    if (auto v = inst->get_optional<std::string>("mu0")) s.mu0 = to_vector(parse_list("mu0", *v));
    if (auto v = inst->get_optional<std::string>("mu")) s.mu = to_vector(parse_list("mu", *v));
    s.mu_scale = get_number<double>(*inst, "mu_scale", s.mu_scale);
    if (auto v = inst->get_optional<std::string>("sigma_diag")) {
      s.sigma = Eigen::MatrixXd(to_vector(parse_list("sigma_diag", *v)).asDiagonal());
    }
    if (auto v = inst->get_optional<std::string>("sigma")) {
      auto vals = parse_list("sigma", *v);
      const auto k = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(vals.size()))));
      if (k * k != static_cast<Eigen::Index>(vals.size())) {
        throw ValidationError("config: sigma must list d*d entries (row-major)");
      }
      s.sigma = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          vals.data(), k, k);
    }
    const std::string noise = inst->get<std::string>("noise", "two_point");
    if (noise == "two_point") {
      s.noise = RadialKind::TwoPoint;
    } else if (noise == "gaussian") {
      s.noise = RadialKind::Gaussian;
    } else {
      throw ValidationError("config: noise must be two_point or gaussian");
    }
    s.kappa_excess = get_number<double>(*inst, "kappa_excess", s.kappa_excess);
  }
  if (auto loss = tree.get_child_optional("loss")) {
    cfg.loss.a = get_number<double>(*loss, "a", cfg.loss.a);
    cfg.loss.b = get_number<double>(*loss, "b", cfg.loss.b);
    cfg.loss.lambda = get_number<double>(*loss, "lambda", cfg.loss.lambda);
    cfg.target_shift = get_number<double>(*loss, "target_shift", cfg.target_shift);
  }
  if (auto p = tree.get_child_optional("pgd")) {
    if (p->count("c_pgd")) cfg.pgd.c_pgd = get_number<double>(*p, "c_pgd", 0.0);
    if (p->count("eps")) cfg.pgd.eps = get_number<double>(*p, "eps", 0.0);
    if (p->count("eta")) cfg.pgd.eta = get_number<double>(*p, "eta", 0.0);
    if (p->count("max_iters")) cfg.pgd.max_iters = get_number<std::int64_t>(*p, "max_iters", 0);
    cfg.fallback_eta = get_number<double>(*p, "fallback_eta", cfg.fallback_eta);
  }
  if (auto s = tree.get_child_optional("sweep")) {
    if (auto v = s->get_optional<std::string>("n")) {
      for (double x : parse_list("sweep.n", *v)) cfg.sweep.n.push_back(static_cast<Eigen::Index>(x));
    }
    if (auto v = s->get_optional<std::string>("d")) {
      for (double x : parse_list("sweep.d", *v)) cfg.sweep.d.push_back(static_cast<int>(x));
    }
    cfg.sweep.trials = get_number<int>(*s, "trials", cfg.sweep.trials);
  }
  if (auto s = tree.get_child_optional("data")) cfg.n = get_number<Eigen::Index>(*s, "n", cfg.n);
  if (auto s = tree.get_child_optional("landscape")) {
    cfg.landscape_trials = get_number<int>(*s, "trials", cfg.landscape_trials);
    cfg.landscape_saddles = get_number<int>(*s, "saddles", cfg.landscape_saddles);
  }
  if (auto s = tree.get_child_optional("eval")) cfg.eval_n_mc = get_number<Eigen::Index>(*s, "n_mc", cfg.eval_n_mc);
  if (auto s = tree.get_child_optional("run")) cfg.seed = get_number<std::uint64_t>(*s, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

void ExperimentConfig::validate() const {
  loss.validate();
  if (has_instance) instance.build();
  if (n < 1) throw ValidationError("config: data.n must be positive");
  if (!sweep.n.empty() || !sweep.d.empty() || sweep.trials != 0) {
    if (sweep.n.empty() || sweep.d.empty() || sweep.trials < 1) {
      throw ValidationError("config: sweep grid needs nonempty n, d and trials >= 1");
    }
    for (auto dd : sweep.d) {
      if (dd < 2) throw ValidationError("config: sweep d must be >= 2");
      for (auto nn : sweep.n) {
        if (nn <= dd) throw ValidationError("config: sweep needs n > d");
      }
    }
  }
  if (pgd.c_pgd && !(*pgd.c_pgd > 0)) throw ValidationError("config: pgd.c_pgd must be positive");
  if (pgd.eps && !(*pgd.eps > 0)) throw ValidationError("config: pgd.eps must be positive");
  if (pgd.eta && !(*pgd.eta > 0)) throw ValidationError("config: pgd.eta must be positive");
  if (pgd.max_iters && *pgd.max_iters < 1) throw ValidationError("config: pgd.max_iters must be >= 1");
  if (eval_n_mc < 10000) throw ValidationError("config: eval.n_mc must be >= 10000");
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream out;
  if (has_instance) {
    out << "[instance]\nd=" << instance.d << '\n';
    if (instance.mu0) out << "mu0=" << join(*instance.mu0) << '\n';
    if (instance.mu) out << "mu=" << join(*instance.mu) << '\n';
    out << "mu_scale=" << format_double(instance.mu_scale) << '\n';
    if (instance.sigma) {
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = *instance.sigma;
      out << "sigma=" << join(Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size())) << '\n';
    }
    out << "noise=" << (instance.noise == RadialKind::TwoPoint ? "two_point" : "gaussian") << '\n';
    out << "kappa_excess=" << format_double(instance.kappa_excess) << '\n';
  }
  out << "[loss]\na=" << format_double(loss.a) << "\nb=" << format_double(loss.b)
      << "\nlambda=" << format_double(loss.lambda) << "\ntarget_shift=" << format_double(target_shift) << '\n';
  out << "[pgd]\n";
  if (pgd.c_pgd) out << "c_pgd=" << format_double(*pgd.c_pgd) << '\n';
  if (pgd.eps) out << "eps=" << format_double(*pgd.eps) << '\n';
  if (pgd.eta) out << "eta=" << format_double(*pgd.eta) << '\n';
  if (pgd.max_iters) out << "max_iters=" << *pgd.max_iters << '\n';
  out << "fallback_eta=" << format_double(fallback_eta) << '\n';
  if (!sweep.n.empty()) {
    out << "[sweep]\nn=";
    for (std::size_t i = 0; i < sweep.n.size(); ++i) out << (i ? "," : "") << sweep.n[i];
    out << "\nd=";
    for (std::size_t i = 0; i < sweep.d.size(); ++i) out << (i ? "," : "") << sweep.d[i];
    out << "\ntrials=" << sweep.trials << '\n';
  }
  out << "[data]\nn=" << n << '\n';
  out << "[landscape]\ntrials=" << landscape_trials << "\nsaddles=" << landscape_saddles << '\n';
  out << "[eval]\nn_mc=" << eval_n_mc << '\n';
  out << "[run]\nseed=" << seed << '\n';
  return out.str();
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : to_ini()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << hash();
  return s.str();
}

LandscapeConstants default_landscape_constants(Eigen::Index n, Eigen::Index d,
                                               const std::optional<MixtureParams>& truth,
                                               double fallback_eta) {
  LandscapeConstants c;
  c.eps = statistical_rate(n, d);
  c.eta = fallback_eta;
  if (truth && truth->noise.mz > 3.0) c.eta = default_saddle_eta(*truth, truth->noise.mz);
  return c;
}

FitResult fit_cure(const Dataset& data, const FitOptions& opts) {
  const EmpiricalObjective obj(data, opts.loss, opts.target_shift);
  FitResult res;
  res.smoothness = estimate_smoothness(obj, derive_seed(opts.seed, 0x51));
  res.constants = default_landscape_constants(data.n(), data.d(), opts.truth, opts.fallback_eta);
  if (opts.pgd.eps) res.constants.eps = *opts.pgd.eps;
  if (opts.pgd.eta) res.constants.eta = *opts.pgd.eta;
  res.config = default_config_for_cure(data.n(), data.d(), res.smoothness, res.constants,
                                       opts.pgd.c_pgd.value_or(0.1), derive_seed(opts.seed, 0x9d));
  if (opts.pgd.max_iters) res.config.max_iters = *opts.pgd.max_iters;
  res.config.record_iterates = opts.record_iterates;
  PgdResult run = run_pgd(PgdCallbacks::from(obj), res.config);
  res.gamma = Gamma::unpack(run.gamma);
  res.trace = std::move(run.trace);
  return res;
}

double loglog_slope(const std::vector<double>& n, const std::vector<double>& err) {
  if (n.size() != err.size() || n.size() < 2) throw ValidationError("loglog_slope: need >= 2 points");
  const std::size_t k = n.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += std::log(n[i]);
    my += std::log(err[i]);
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(n[i]) - mx;
    sxy += dx * (std::log(err[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  for (double x : v) s += x;
  return s / v.size();
}

template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

std::uint64_t cell_seed(std::uint64_t seed, int d, Eigen::Index n, int trial) {
  return derive_seed(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(d)), static_cast<std::uint64_t>(n)),
                     static_cast<std::uint64_t>(trial));
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, int jobs, Eigen::Index mc_samples) {
  if (cfg.sweep.n.empty() || cfg.sweep.d.empty() || cfg.sweep.trials < 1) {
    throw ValidationError("sweep: grid is empty");
  }
  struct Cell {
    int d;
    Eigen::Index n;
    int trial;
  };
  std::vector<Cell> cells;
  for (int d : cfg.sweep.d)
    for (Eigen::Index n : cfg.sweep.n)
      for (int t = 0; t < cfg.sweep.trials; ++t) cells.push_back({d, n, t});

  SweepResult res;
  res.rows.resize(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    SweepRow& row = res.rows[i];
    row.trial = c.trial;
    row.n = c.n;
    row.d = c.d;
    row.seed = cell_seed(cfg.seed, c.d, c.n, c.trial);
    try {
      const MixtureParams params = cfg.instance.build(c.d);
      const Dataset ds = sample(params, c.n, row.seed);
      FitOptions opts;
      opts.loss = cfg.loss;
      opts.target_shift = cfg.target_shift;
      opts.pgd = cfg.pgd;
      opts.seed = row.seed;
      opts.truth = params;
      opts.fallback_eta = cfg.fallback_eta;
      const FitResult fit = fit_cure(ds, opts);
      row.est_error = minimizer_error(fit.gamma, params, params.noise.mz);
      row.misclass = empirical_misclass(fit.gamma, ds).misclass_rate;
      const Gamma bayes = bayes_classifier(params).gamma_bayes;
      row.excess = paired_excess_risk_mc(fit.gamma, bayes, params, mc_samples, derive_seed(row.seed, 0xe1)).rate;
      if (fit.trace.outcome == PgdOutcome::MaxItersExceeded) row.error = "max_iters exceeded";
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  for (int d : cfg.sweep.d) {
    std::vector<double> ns, meds;
    for (Eigen::Index n : cfg.sweep.n) {
      SweepCellSummary s;
      s.n = n;
      s.d = d;
      std::vector<double> errs, mis;
      for (const auto& row : res.rows) {
        if (row.d != d || row.n != n) continue;
        if (row.error.empty()) {
          ++s.ok;
          errs.push_back(row.est_error);
          mis.push_back(row.misclass);
        } else {
          ++s.failed;
        }
      }
      s.median_est_error = median(errs);
      s.mean_est_error = mean(errs);
      s.median_misclass = median(mis);
      s.mean_misclass = mean(mis);
      res.cells.push_back(s);
      if (s.ok > 0) {
        ns.push_back(static_cast<double>(n));
        meds.push_back(s.median_est_error);
      }
    }
    if (ns.size() >= 2) res.slopes.emplace_back(d, loglog_slope(ns, meds));
  }
  return res;
}

void write_sweep_csv(const SweepResult& res, std::ostream& out) {
  out << "trial,n,d,method,misclass,excess,est_error,seed\n";
  for (const auto& r : res.rows) {
    if (!r.error.empty()) {
      out << r.trial << ',' << r.n << ',' << r.d << ',' << r.method << ",nan,nan,nan," << r.seed << '\n';
      continue;
    }
    out << r.trial << ',' << r.n << ',' << r.d << ',' << r.method << ',' << format_double(r.misclass) << ','
        << format_double(r.excess) << ',' << format_double(r.est_error) << ',' << r.seed << '\n';
  }
}

LandscapeAudit run_landscape_audit(const ExperimentConfig& cfg, int trials, int saddles, int jobs) {
  LandscapeAudit audit;
  const MixtureParams params = cfg.instance.build();
  const double mz = params.noise.mz;
  if (!params.noise.leptokurtic()) {
    audit.warnings.push_back("noise law is not leptokurtic (mz = 3); the landscape predictions do not apply");
  }
  const int d = params.dim();

  if (mz > 3.0) {
    // Quartic oracle in whitened coordinates.
    PopulationQuartic pq;
    pq.mu = symmetric_sqrt(params.sigma).inverse() * params.mu;
    pq.mz = mz;
    pq.lambda = std::max(1.0, cfg.loss.lambda);
    const Tolerances oracle_tol;
    const Gamma anchor = quartic_global_minimizer(pq);
    std::vector<Gamma> pts = {anchor, Gamma(0.0, -anchor.beta), Gamma::zero(d)};
    const MixtureParams white = whitened_params(pq);
    const PredictedCriticalSets sets = predicted_critical_sets(white, mz);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xa11));
    if (d >= 2) {
      for (int k = 0; k < saddles; ++k) pts.push_back(sets.sample_saddle(rng));
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      CriticalPointReport rep = classify_point(pq, pts[k], oracle_tol);
      audit.worst_quartic_grad = std::max(audit.worst_quartic_grad, rep.grad_norm);
      switch (rep.classification) {
        case PointClass::LocalMin: ++audit.quartic_local_min; break;
        case PointClass::StrictSaddle: ++audit.quartic_strict_saddle; break;
        case PointClass::Unclassified: ++audit.quartic_unclassified; break;
      }
      audit.points.emplace_back(k < 2 ? "quartic_minimum" : (k == 2 ? "quartic_origin" : "quartic_saddle"),
                                std::move(rep));
    }
  }

  if (trials > 0) {
    const Eigen::Index n = 200 * static_cast<Eigen::Index>(d);
    const double rate = statistical_rate(n, d);
    Tolerances tol;
    tol.grad_eps = rate;
    tol.eig_eta = mz > 3.0 ? default_saddle_eta(params, mz) : cfg.fallback_eta;
    std::optional<PredictedCriticalSets> sets;
    if (mz > 3.0) sets = predicted_critical_sets(params, mz);
    std::vector<CriticalPointReport> reps(static_cast<std::size_t>(trials));
    std::vector<double> errs(static_cast<std::size_t>(trials), std::numeric_limits<double>::quiet_NaN());
    parallel_for(reps.size(), jobs, [&](std::size_t t) {
      const std::uint64_t seed = derive_seed(cfg.seed, 0x1a000 + t);
      const Dataset ds = sample(params, n, seed);
      FitOptions opts;
      opts.loss = cfg.loss;
      opts.target_shift = cfg.target_shift;
      opts.pgd = cfg.pgd;
      opts.seed = seed;
      opts.truth = params;
      opts.fallback_eta = cfg.fallback_eta;
      const FitResult fit = fit_cure(ds, opts);
      const EmpiricalObjective obj(ds, cfg.loss, cfg.target_shift);
      reps[t] = classify_point(obj, fit.gamma, tol, sets ? &*sets : nullptr);
      if (mz > 3.0) errs[t] = minimizer_error(fit.gamma, params, mz);
    });
    for (std::size_t t = 0; t < reps.size(); ++t) {
      switch (reps[t].classification) {
        case PointClass::LocalMin: ++audit.empirical_local_min; break;
        case PointClass::StrictSaddle: ++audit.empirical_strict_saddle; break;
        case PointClass::Unclassified: ++audit.empirical_unclassified; break;
      }
      if (errs[t] <= 5.0 * rate) ++audit.empirical_within_rate;
      if (std::isfinite(reps[t].dist_to_predicted)) {
        audit.worst_empirical_dist = std::max(audit.worst_empirical_dist, reps[t].dist_to_predicted);
      }
      audit.points.emplace_back("empirical_pgd", std::move(reps[t]));
    }
  }
  return audit;
}

}  // namespace cure
