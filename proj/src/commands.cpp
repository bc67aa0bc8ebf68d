#include "cure/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "cure/csv.hpp"
#include "cure/errors.hpp"
#include "cure/eval.hpp"

namespace cure {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

json meta_json(const ExperimentConfig& cfg, const std::string& command) {
  return {{"config_hash", cfg.hash_hex()}, {"seed", cfg.seed}, {"command", command}};
}

std::ofstream open_out(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

// CSV outputs carry their metadata in a sidecar file next to them.
void write_sidecar(const fs::path& csv, const ExperimentConfig& cfg, const std::string& command) {
  write_json(fs::path(csv.string() + ".meta.json"), meta_json(cfg, command));
}

std::optional<MixtureParams> truth_of(const ExperimentConfig& cfg) {
  if (!cfg.has_instance) return std::nullopt;
  return cfg.instance.build();
}

json report_json(const std::string& source, const CriticalPointReport& r) {
  return {{"source", source},
          {"alpha", number(r.gamma.alpha)},
          {"beta", vector_json(r.gamma.beta)},
          {"grad_norm", number(r.grad_norm)},
          {"lambda_min", number(r.lambda_min)},
          {"lambda_max", number(r.lambda_max)},
          {"classification", to_string(r.classification)},
          {"dist_to_predicted", number(r.dist_to_predicted)},
          {"diagnostic", r.diagnostic}};
}

}  // namespace

ExperimentConfig resolve_config(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.config ? load_config(*opts.config) : ExperimentConfig{};
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.jobs < 1) throw ValidationError("--jobs must be >= 1");
  return cfg;
}

int cmd_synth(const CommonOptions& opts, std::ostream& log) {
  const ExperimentConfig cfg = resolve_config(opts);
  const MixtureParams params = cfg.instance.build();
  const Dataset ds = sample(params, cfg.n, cfg.seed);
  const fs::path path = opts.out / "data.csv";
  {
    auto out = open_out(path);
    write_csv(ds, out);
    if (!out) throw IoError("write failed: " + path.string());
  }
  write_sidecar(path, cfg, "synth");
  log << "wrote " << path.string() << " (n=" << ds.n() << ", d=" << ds.d() << ")\n";
  return exit_code::ok;
}

int cmd_fit(const CommonOptions& opts, const fs::path& data, std::ostream& log) {
  const ExperimentConfig cfg = resolve_config(opts);
  const Dataset ds = load_csv(data);
  FitOptions fo;
  fo.loss = cfg.loss;
  fo.target_shift = cfg.target_shift;
  fo.pgd = cfg.pgd;
  fo.seed = cfg.seed;
  fo.fallback_eta = cfg.fallback_eta;
  if (cfg.has_instance) {
    MixtureParams truth = cfg.instance.build();
    if (truth.dim() != ds.d()) throw DimensionError("config instance d does not match data columns");
    fo.truth = std::move(truth);
  }
  const FitResult fit = fit_cure(ds, fo);
  const bool exhausted = fit.trace.outcome == PgdOutcome::MaxItersExceeded;

  const fs::path trace_path = opts.out / "trace.csv";
  {
    auto out = open_out(trace_path);
    write_trace_csv(fit.trace, out);
  }
  write_sidecar(trace_path, cfg, "fit");

  const auto& dp = fit.trace.derived;
  json j = {{"alpha", number(fit.gamma.alpha)},
            {"beta", vector_json(fit.gamma.beta)},
            {"iterations", fit.trace.iter_count},
            {"perturbations", fit.trace.perturbations},
            {"final_grad_norm", number(fit.trace.final_grad_norm)},
            {"certified", fit.trace.certified},
            {"outcome", exhausted ? "max_iters_exceeded" : "returned_candidate"},
            {"schedule",
             {{"ell", fit.config.ell},
              {"rho", fit.config.rho},
              {"eps_pgd", fit.config.eps_pgd},
              {"max_iters", fit.config.max_iters},
              {"step", dp.eta_step},
              {"g_thres", dp.g_thres},
              {"f_thres", dp.f_thres},
              {"t_thres", dp.t_thres},
              {"radius", dp.r}}},
            {"meta", meta_json(cfg, "fit")}};
  write_json(opts.out / "gamma.json", j);
  log << "iterations " << fit.trace.iter_count << ", final |grad| " << fit.trace.final_grad_norm << '\n';
  if (exhausted) {
    log << "error: PGD iteration budget exhausted; partial trace written\n";
    return exit_code::budget;
  }
  return exit_code::ok;
}

Gamma load_gamma_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  try {
    Gamma g;
    g.alpha = j.at("alpha").get<double>();
    const auto beta = j.at("beta").get<std::vector<double>>();
    g.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    return g;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": expected numeric alpha and beta: " + e.what());
  }
}

int cmd_eval(const CommonOptions& opts, const fs::path& data, const std::optional<fs::path>& gamma_json,
             const std::optional<std::string>& baseline, std::ostream& log) {
  const ExperimentConfig cfg = resolve_config(opts);
  const Dataset ds = load_csv(data);
  if (!ds.labels) throw ValidationError(data.string() + ": evaluation needs a label column");
  const auto truth = truth_of(cfg);
  if (truth && truth->dim() != ds.d()) throw DimensionError("config instance d does not match data columns");

  std::string method = "cure";
  std::optional<Gamma> g;
  EvalReport rep;
  if (baseline) {
    method = *baseline;
    if (*baseline == "pca") {
      g = pca_baseline(ds);
    } else if (*baseline == "kmeans") {
      rep = label_misclass(kmeans_baseline(ds, cfg.seed), ds);
    } else {
      throw ValidationError("--baseline must be pca or kmeans");
    }
  } else {
    if (!gamma_json) throw ValidationError("eval needs GAMMA.json or --baseline");
    g = load_gamma_json(*gamma_json);
  }
  if (g) {
    if (g->dim() != ds.d()) throw DimensionError("gamma has d = " + std::to_string(g->dim()) +
                                                 " but data has " + std::to_string(ds.d()) + " columns");
    rep = empirical_misclass(*g, ds);
  }

  json j = {{"method", method}, {"n", ds.n()}, {"d", ds.d()}};
  if (truth) {
    const Gamma bayes = bayes_classifier(*truth).gamma_bayes;
    const McRisk bayes_risk = population_misclass_mc(bayes, *truth, cfg.eval_n_mc, derive_seed(cfg.seed, 0xe7));
    j["bayes_risk_mc"] = number(bayes_risk.rate);
    if (g) {
      rep.excess_risk = paired_excess_risk_mc(*g, bayes, *truth, cfg.eval_n_mc, derive_seed(cfg.seed, 0xe7)).rate;
      if (truth->noise.mz > 3.0) rep.estimation_error = minimizer_error(*g, *truth, truth->noise.mz);
    }
  }
  j["misclass_rate"] = number(rep.misclass_rate);
  j["excess_risk"] = number(rep.excess_risk);
  j["sign"] = rep.sign;
  j["estimation_error"] = number(rep.estimation_error);
  if (g) {
    j["alpha"] = number(g->alpha);
    j["beta"] = vector_json(g->beta);
  }
  j["meta"] = meta_json(cfg, "eval");
  write_json(opts.out / "report.json", j);
  log << method << " misclassification " << rep.misclass_rate << '\n';
  return exit_code::ok;
}

int cmd_landscape(const CommonOptions& opts, std::ostream& log) {
  const ExperimentConfig cfg = resolve_config(opts);
  const LandscapeAudit audit = run_landscape_audit(cfg, cfg.landscape_trials, cfg.landscape_saddles, opts.jobs);
  const fs::path path = opts.out / "report.jsonl";
  auto out = open_out(path);
  for (const auto& [source, rep] : audit.points) out << report_json(source, rep).dump() << '\n';
  json summary = {{"quartic", {{"LocalMin", audit.quartic_local_min},
                               {"StrictSaddle", audit.quartic_strict_saddle},
                               {"Unclassified", audit.quartic_unclassified},
                               {"worst_grad_norm", number(audit.worst_quartic_grad)}}},
                  {"empirical", {{"LocalMin", audit.empirical_local_min},
                                 {"StrictSaddle", audit.empirical_strict_saddle},
                                 {"Unclassified", audit.empirical_unclassified},
                                 {"within_rate", audit.empirical_within_rate},
                                 {"worst_dist_to_predicted", number(audit.worst_empirical_dist)}}},
                  {"warnings", audit.warnings}};
  out << json{{"summary", summary}, {"meta", meta_json(cfg, "landscape")}}.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
  for (const auto& w : audit.warnings) log << "warning: " << w << '\n';
  log << summary.dump() << '\n';
  return exit_code::ok;
}

int cmd_sweep(const CommonOptions& opts, std::ostream& log) {
  const ExperimentConfig cfg = resolve_config(opts);
  if (cfg.sweep.n.empty() || cfg.sweep.d.empty() || cfg.sweep.trials < 1) {
    throw ValidationError("sweep: config needs a [sweep] section with n, d and trials");
  }
  const SweepResult res = run_sweep(cfg, opts.jobs);
  const fs::path path = opts.out / "rates.csv";
  {
    auto out = open_out(path);
    write_sweep_csv(res, out);
  }
  write_sidecar(path, cfg, "sweep");

  json cells = json::array();
  for (const auto& c : res.cells) {
    cells.push_back({{"n", c.n},
                     {"d", c.d},
                     {"ok", c.ok},
                     {"failed", c.failed},
                     {"median_est_error", number(c.median_est_error)},
                     {"mean_est_error", number(c.mean_est_error)},
                     {"median_misclass", number(c.median_misclass)},
                     {"mean_misclass", number(c.mean_misclass)}});
  }
  json slopes = json::array();
  for (const auto& [d, s] : res.slopes) slopes.push_back({{"d", d}, {"loglog_slope", number(s)}});
  json failures = json::array();
  for (const auto& r : res.rows) {
    if (!r.error.empty()) failures.push_back({{"n", r.n}, {"d", r.d}, {"trial", r.trial}, {"error", r.error}});
  }
  write_json(opts.out / "summary.json",
             {{"cells", cells}, {"slopes", slopes}, {"failures", failures}, {"meta", meta_json(cfg, "sweep")}});
  for (const auto& [d, s] : res.slopes) log << "d=" << d << " log-log slope " << s << '\n';
  if (!failures.empty()) log << failures.size() << " cell(s) failed; see summary.json\n";
  return exit_code::ok;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return exit_code::validation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_code::io;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::failure;
  }
}

}  // namespace cure
