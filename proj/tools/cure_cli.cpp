#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cure/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"CURE: clustering via uncoupled regression"};
  app.require_subcommand(1);

  cure::CommonOptions common;
  std::string config, out = ".";
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "RNG seed (overrides the config)");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "sample a dataset from the configured instance");
  add_common(synth);

  std::string data, gamma, baseline;
  auto* fit = app.add_subcommand("fit", "fit CURE to a CSV dataset");
  fit->add_option("data", data, "dataset CSV")->required();
  add_common(fit);

  auto* eval = app.add_subcommand("eval", "evaluate a fitted gamma or a baseline on labeled data");
  eval->add_option("data", data, "dataset CSV with a label column")->required();
  eval->add_option("gamma", gamma, "gamma.json from fit");
  eval->add_option("--baseline", baseline, "pca or kmeans")->check(CLI::IsMember({"pca", "kmeans"}));
  add_common(eval);

  auto* land = app.add_subcommand("landscape", "audit critical points of the configured instance");
  add_common(land);

  auto* sweep = app.add_subcommand("sweep", "rate-scaling sweep over an (n, d) grid");
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cure::exit_code::validation;
  }

  if (!config.empty()) common.config = config;
  for (auto* sub : {synth, fit, eval, land, sweep}) {
    if (sub->parsed() && sub->count("--seed")) common.seed = seed;
  }
  common.out = out;

  return cure::run_guarded(
      [&]() -> int {
        if (synth->parsed()) return cure::cmd_synth(common, std::cout);
        if (fit->parsed()) return cure::cmd_fit(common, data, std::cout);
        if (eval->parsed()) {
          std::optional<std::filesystem::path> g;
          if (!gamma.empty()) g = gamma;
          std::optional<std::string> b;
          if (!baseline.empty()) b = baseline;
          return cure::cmd_eval(common, data, g, b, std::cout);
        }
        if (land->parsed()) return cure::cmd_landscape(common, std::cout);
        return cure::cmd_sweep(common, std::cout);
      },
      std::cerr);
}
