#include "cure/pgd.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cure/csv.hpp"
#include "cure/errors.hpp"

namespace cure {

void PgdConfig::validate() const {
  if (gamma0.size() < 1) throw ValidationError("pgd: gamma0 is empty");
  if (!gamma0.allFinite()) throw ValidationError("pgd: gamma0 must be finite");
  if (!(ell > 0 && rho > 0 && eps_pgd > 0 && c_pgd > 0 && delta_cap > 0)) {
    throw ValidationError("pgd: ell, rho, eps_pgd, c_pgd and delta_cap must be positive");
  }
  if (!(delta_pgd > 0 && delta_pgd < 1)) throw ValidationError("pgd: delta_pgd must lie in (0, 1)");
  if (!(eps_pgd <= ell * ell / rho)) throw ValidationError("pgd: eps_pgd must not exceed ell^2 / rho");
  if (max_iters < 1) throw ValidationError("pgd: max_iters must be at least 1");
}

PgdDerived derive_params(const PgdConfig& cfg, Eigen::Index d) {
  cfg.validate();
  const double arg = static_cast<double>(d) * cfg.ell * cfg.delta_cap /
                     (cfg.c_pgd * cfg.eps_pgd * cfg.eps_pgd * cfg.delta_pgd);
  if (!(arg > 0.0) || !std::isfinite(arg)) {
    std::ostringstream msg;
    msg << "pgd: log argument d*ell*Delta/(c*eps^2*delta) = " << arg << " is not positive and finite";
    throw NumericalError(msg.str());
  }
  PgdDerived p;
  p.chi = 3.0 * std::max(std::log(arg), 4.0);
  const double sc = std::sqrt(cfg.c_pgd);
  const double chi2 = p.chi * p.chi;
  p.eta_step = cfg.c_pgd / cfg.ell;
  p.r = sc * cfg.eps_pgd / (chi2 * cfg.ell);
  p.g_thres = sc * cfg.eps_pgd / chi2;
  p.f_thres = cfg.c_pgd * std::pow(cfg.eps_pgd, 1.5) / (chi2 * p.chi * std::sqrt(cfg.rho));
  const double t_real = p.chi * cfg.ell / (cfg.c_pgd * cfg.c_pgd * std::sqrt(cfg.rho * cfg.eps_pgd));
  if (!std::isfinite(t_real) || t_real > 1e17) throw NumericalError("pgd: t_thres overflows");
  p.t_thres = static_cast<std::int64_t>(std::ceil(t_real));
  return p;
}

PgdCallbacks PgdCallbacks::from(const EmpiricalObjective& obj) {
  PgdCallbacks cb;
  cb.value = [&obj](const Eigen::VectorXd& g) { return obj.value(g); };
  cb.gradient = [&obj](const Eigen::VectorXd& g) { return obj.value_and_gradient(g).gradient; };
  cb.value_and_gradient = [&obj](const Eigen::VectorXd& g) { return obj.value_and_gradient(g); };
  return cb;
}

Eigen::VectorXd sample_uniform_ball(Eigen::Index dim, double r, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd dir(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (Eigen::Index j = 0; j < dim; ++j) dir(j) = normal(rng);
    norm = dir.norm();
  }
  const double radius = r * std::pow(unit(rng), 1.0 / static_cast<double>(dim));
  return (radius / norm) * dir;
}

namespace {

ValueGradient evaluate(const PgdCallbacks& cb, const Eigen::VectorXd& g) {
  ValueGradient vg = cb.value_and_gradient ? cb.value_and_gradient(g)
                                           : ValueGradient{cb.value(g), cb.gradient(g)};
  if (!std::isfinite(vg.value) || !vg.gradient.allFinite()) {
    std::ostringstream msg;
    msg << "pgd: objective is not finite at gamma = [" << g.transpose() << "]";
    throw NumericalError(msg.str());
  }
  return vg;
}

}  // namespace

namespace {

struct HistoryEntry {
  std::int64_t t;
  Eigen::VectorXd gamma;
  double value;
  double grad_norm;
};

}  // namespace

PgdResult run_pgd(const PgdCallbacks& cb, const PgdConfig& cfg) {
  const PgdDerived p = derive_params(cfg, cfg.gamma0.size());
  std::mt19937_64 rng(cfg.seed);

  PgdResult res;
  PgdTrace& trace = res.trace;
  trace.derived = p;

  Eigen::VectorXd gamma = cfg.gamma0;
  Eigen::VectorXd gamma_tilde;
  double value_tilde = 0.0;
  std::int64_t t_noise = -p.t_thres - 1;
  // Recent consecutive states since the last perturbation or jump.
  std::deque<HistoryEntry> history;

  std::int64_t t = 0;
  bool returned = false;
  while (t < cfg.max_iters) {
    // Exact cycle: gamma_t equals gamma_{t - period}.
    int period = 0;
    for (std::size_t k = history.size(); k-- > 0;) {
      if (history[k].gamma == gamma) {
        period = static_cast<int>(t - history[k].t);
        break;
      }
    }
    if (period > 0) {
      const std::size_t first = history.size() - static_cast<std::size_t>(period);
      auto state_at = [&](std::int64_t s) -> const HistoryEntry& {
        return history[first + static_cast<std::size_t>((s - t) % period)];
      };
      std::int64_t next_event = cfg.max_iters;
      const std::int64_t return_time = t_noise + p.t_thres;
      if (return_time >= t) next_event = std::min(next_event, return_time);
      const std::int64_t perturb_from = std::max(t, return_time + 1);
      for (std::int64_t s = perturb_from; s < perturb_from + period && s < next_event; ++s) {
        if (state_at(s).grad_norm <= p.g_thres) {
          next_event = s;
          break;
        }
      }
      if (next_event > t) {
        TraceRow row;
        row.t = t;
        row.repeat = next_event - t;
        row.period = period;
        trace.iterates.push_back(std::move(row));
        gamma = state_at(next_event).gamma;
        t = next_event;
        history.clear();
        continue;
      }
    }

    ValueGradient vg = evaluate(cb, gamma);
    double gnorm = vg.gradient.norm();
    bool perturbed = false;

    if (gnorm <= p.g_thres && t - t_noise > p.t_thres) {
      gamma_tilde = gamma;
      value_tilde = vg.value;
      t_noise = t;
      gamma += sample_uniform_ball(gamma.size(), p.r, rng);
      vg = evaluate(cb, gamma);
      gnorm = vg.gradient.norm();
      perturbed = true;
      ++trace.perturbations;
      history.clear();
    }

    TraceRow row;
    row.t = t;
    if (cfg.record_iterates) row.gamma = gamma;
    row.grad_norm = gnorm;
    row.value = vg.value;
    row.perturbed = perturbed;
    trace.iterates.push_back(std::move(row));

    if (t - t_noise == p.t_thres && vg.value - value_tilde > -p.f_thres) {
      returned = true;
      break;
    }

    history.push_back({t, gamma, vg.value, gnorm});
    if (history.size() > static_cast<std::size_t>(kMaxCycle)) history.pop_front();
    gamma -= p.eta_step * vg.gradient;
    ++t;
  }

  trace.iter_count = t;
  if (returned) {
    trace.outcome = PgdOutcome::ReturnedCandidate;
    res.gamma = gamma_tilde;
    trace.certified = true;
  } else {
    trace.outcome = PgdOutcome::MaxItersExceeded;
    trace.certified = gamma_tilde.size() > 0;
    res.gamma = trace.certified ? gamma_tilde : gamma;
  }
  trace.final_grad_norm = evaluate(cb, res.gamma).gradient.norm();
  return res;
}

void write_trace_csv(const PgdTrace& trace, std::ostream& out) {
  out << "t,grad_norm,value,perturbed\n";
  std::deque<std::string> recent;  // "grad_norm,value" of the last kMaxCycle lines
  auto remember = [&](std::string tail) {
    recent.push_back(std::move(tail));
    if (recent.size() > static_cast<std::size_t>(kMaxCycle)) recent.pop_front();
  };
  for (const auto& row : trace.iterates) {
    if (row.period == 0) {
      std::string tail = format_double(row.grad_norm) + "," + format_double(row.value);
      out << row.t << ',' << tail << ',' << (row.perturbed ? 1 : 0) << '\n';
      remember(std::move(tail));
      continue;
    }
    const std::vector<std::string> cycle(recent.end() - row.period, recent.end());
    for (std::int64_t k = 0; k < row.repeat; ++k) {
      const std::string& tail = cycle[static_cast<std::size_t>(k % row.period)];
      out << (row.t + k) << ',' << tail << ",0\n";
    }
    for (int k = 0; k < row.period; ++k) {
      remember(cycle[static_cast<std::size_t>((row.repeat + k) % row.period)]);
    }
  }
}

double statistical_rate(Eigen::Index n, Eigen::Index d) {
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  return std::sqrt(dd * std::log(nn / dd) / nn);
}

SmoothnessEstimate estimate_smoothness(const EmpiricalObjective& obj, std::uint64_t seed,
                                       int directions) {
  const DerivBounds bounds = derivative_bounds(obj.spec());
  const Eigen::MatrixXd& xbar = obj.augmented();
  const double inv_n = 1.0 / static_cast<double>(obj.n());

  const Eigen::MatrixXd second = (xbar.transpose() * xbar) * inv_n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(second, Eigen::EigenvaluesOnly);
  Eigen::VectorXd mu_bar(obj.d() + 1);
  mu_bar << 1.0, obj.mu_hat();

  SmoothnessEstimate est;
  est.ell = bounds.F2 * eig.eigenvalues().maxCoeff() + obj.spec().lambda * mu_bar.squaredNorm();

  std::mt19937_64 rng(seed);
  double third = 0.0;
  for (int k = 0; k < directions; ++k) {
    const Eigen::VectorXd u = sample_uniform_ball(obj.d() + 1, 1.0, rng).normalized();
    third = std::max(third, (xbar * u).array().abs().cube().sum() * inv_n);
  }
  est.rho_base = 2.0 * bounds.F3 * third;
  return est;
}

PgdConfig default_config_for_cure(Eigen::Index n, Eigen::Index d, const SmoothnessEstimate& smooth,
                                  const LandscapeConstants& landscape, double c_pgd,
                                  std::uint64_t seed) {
  if (!(n > d && d >= 1)) throw ValidationError("pgd schedule: requires n > d >= 1");
  if (!(smooth.ell > 0 && smooth.rho_base > 0)) throw ValidationError("pgd schedule: smoothness must be positive");
  if (!(landscape.eps > 0 && landscape.eta > 0)) throw ValidationError("pgd schedule: eps and eta must be positive");
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);

  PgdConfig cfg;
  cfg.gamma0 = Eigen::VectorXd::Zero(d + 1);
  cfg.ell = smooth.ell;
  cfg.rho = smooth.rho_base * std::max(1.0, dd * std::log(nn / dd) / std::sqrt(nn));
  cfg.delta_pgd = std::pow(nn, -11.0);
  cfg.delta_cap = 0.25;
  cfg.c_pgd = c_pgd;
  cfg.eps_pgd = std::min({statistical_rate(n, d), cfg.ell * cfg.ell / cfg.rho,
                          landscape.eta * landscape.eta / cfg.rho, landscape.eps});
  cfg.seed = seed;

  const double chi = derive_params(cfg, d + 1).chi;
  const double budget = 10.0 * (nn / dd + dd * dd / nn + 100.0) * std::pow(chi, 4);
  cfg.max_iters = budget >= 9e18 ? std::numeric_limits<std::int64_t>::max() / 2
                                 : static_cast<std::int64_t>(std::ceil(budget));
  return cfg;
}

}  // namespace cure
