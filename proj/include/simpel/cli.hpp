#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "simpel/common.hpp"

namespace simpel {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCorrupt = 3;
inline constexpr int kExitNumerical = 4;

/// Symmetric two-component mixture used by the score benchmark.
inline constexpr double kBimodalMean = 1.5;
inline constexpr double kBimodalStd = 0.5;

Matrix bimodal_samples(int n, Rng& rng);
/// d/dx log of 0.5 N(x | -m, s^2) + 0.5 N(x | m, s^2), elementwise.
Matrix bimodal_score(const Matrix& x);

struct RunOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool resume = false;
  bool record_timing = true;
  std::vector<std::string> overrides;
};

void cmd_score_bench(const RunOptions& options);
void cmd_regression(const RunOptions& options);
void cmd_rl(const RunOptions& options);
/// Writes the report to `os`.
void cmd_inspect(const std::string& checkpoint_path, std::ostream& os);

/// Parses argv, dispatches and maps errors to exit codes.
int run_cli(int argc, char** argv);

}  // namespace simpel
