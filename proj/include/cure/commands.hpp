#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "cure/experiment.hpp"

namespace cure {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int validation = 2;
inline constexpr int budget = 3;
inline constexpr int io = 4;
}  // namespace exit_code

struct CommonOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = ".";
  int jobs = 1;
};

/// Loads the config file (or defaults) and applies --seed.
ExperimentConfig resolve_config(const CommonOptions& opts);

// Each command writes into opts.out and returns an exit code. Errors are
// thrown; run_guarded turns them into exit codes.
int cmd_synth(const CommonOptions& opts, std::ostream& log);
int cmd_fit(const CommonOptions& opts, const std::filesystem::path& data, std::ostream& log);
int cmd_eval(const CommonOptions& opts, const std::filesystem::path& data,
             const std::optional<std::filesystem::path>& gamma_json,
             const std::optional<std::string>& baseline, std::ostream& log);
int cmd_landscape(const CommonOptions& opts, std::ostream& log);
int cmd_sweep(const CommonOptions& opts, std::ostream& log);

int run_guarded(const std::function<int()>& body, std::ostream& err);

/// gamma.json round trip.
Gamma load_gamma_json(const std::filesystem::path& path);

}  // namespace cure
