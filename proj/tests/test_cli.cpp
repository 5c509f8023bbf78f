#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "simpel/cli.hpp"
#include "simpel/ensemble.hpp"

using namespace simpel;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = SIMPEL_CONFIG_DIR;

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "simpel");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

std::string write_config(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}), kExitConfig);
  EXPECT_EQ(run({"regression"}), kExitConfig);
  EXPECT_EQ(run({"regression", "--config", "/nonexistent/config.yaml"}), kExitConfig);
  EXPECT_EQ(run({"bogus-subcommand"}), kExitConfig);
}

TEST(Cli, InvalidConfigValuesExitTwo) {
  const auto out = fresh_dir("simpel_cli_bad");
  EXPECT_EQ(run({"score-bench", "--config", kConfigDir + "/score_bench.yaml", "--out", out.string(),
                 "--set", "score_bench.estimators=[magic]"}),
            kExitConfig);
  EXPECT_EQ(run({"regression", "--config", kConfigDir + "/smoke.yaml", "--out", out.string(), "--set",
                 "model.particles=-1"}),
            kExitConfig);
}

TEST(Cli, ScoreBenchWritesOracleColumns) {
  const auto out = fresh_dir("simpel_cli_score");
  ASSERT_EQ(run({"score-bench", "--config", kConfigDir + "/score_bench.yaml", "--out", out.string(),
                 "--set", "score_bench.num_samples=200", "--set", "score_bench.estimators=[gaussian, kde]",
                 "--no-timing"}),
            kExitOk);
  const std::string csv = slurp(out / "score_bench.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "estimator,query_index,dim,query,score,oracle,wall_time_s");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 21);
}

TEST(Cli, RegressionSmokeAndDeterminism) {
  const auto a = fresh_dir("simpel_cli_reg_a");
  const auto b = fresh_dir("simpel_cli_reg_b");
  const std::vector<std::string> common{"--config", kConfigDir + "/smoke.yaml", "--set", "fsvgd.iterations=40",
                                        "--no-timing"};
  auto args = common;
  args.insert(args.begin(), "regression");
  auto args_a = args;
  args_a.insert(args_a.end(), {"--out", a.string(), "--workers", "1"});
  auto args_b = args;
  args_b.insert(args_b.end(), {"--out", b.string(), "--workers", "2"});
  ASSERT_EQ(run(args_a), kExitOk);
  ASSERT_EQ(run(args_b), kExitOk);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  // Resume keeps the finished row.
  auto args_r = args_a;
  args_r.push_back("--resume");
  ASSERT_EQ(run(args_r), kExitOk);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
}

TEST(Cli, InspectReportsAndRejectsCorruption) {
  const auto dir = fresh_dir("simpel_cli_inspect");
  fs::create_directories(dir);
  const auto path = (dir / "model.bin").string();
  const ParticleEnsemble e = ParticleEnsemble::initialize({1, 1, {4}, Activation::kTanh},
                                                          Normalizer::identity(1, 1), Vector::Ones(1), 2, 1);
  save_checkpoint(path, e);
  std::ostringstream report;
  cmd_inspect(path, report);
  EXPECT_NE(report.str().find("particles"), std::string::npos);
  EXPECT_EQ(run({"inspect", path}), kExitOk);
  fs::resize_file(path, 20);
  EXPECT_EQ(run({"inspect", path}), kExitCorrupt);
}

TEST(Cli, OfflineRlMissingBufferExitsTwo) {
  const auto out = fresh_dir("simpel_cli_rl_missing");
  EXPECT_EQ(run({"rl", "--config", kConfigDir + "/rl_pendulum_offline.yaml", "--out", out.string(), "--set",
                 "rl.buffer_path=/nonexistent/buffer.csv"}),
            kExitConfig);
}

TEST(Cli, RlOracleSingleEpisode) {
  const auto out = fresh_dir("simpel_cli_rl");
  const std::string cfg = write_config("simpel_cli_rl.yaml",
                                       "task:\n  system: pendulum\n"
                                       "planner:\n  horizon: 5\n  population: 10\n  elites: 2\n  iterations: 1\n"
                                       "rl:\n  mode: episodic\n  models: [oracle]\n  seeds: [0]\n"
                                       "  episodes: 1\n  episode_length: 10\n");
  ASSERT_EQ(run({"rl", "--config", cfg, "--out", out.string(), "--no-timing"}), kExitOk);
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  EXPECT_TRUE(fs::exists(out / "episodes_oracle_seed0.csv"));
  const std::string log = slurp(out / "episodes_oracle_seed0.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
}

TEST(Cli, NumericalFailureExitsFour) {
  const auto out = fresh_dir("simpel_cli_nan");
  // A nu-method step far beyond the stable range diverges.
  EXPECT_EQ(run({"score-bench", "--config", kConfigDir + "/score_bench.yaml", "--out", out.string(), "--set",
                 "score_bench.num_samples=100", "--set", "score_bench.estimators=[nu-method]", "--set",
                 "estimator.nu_method.step=10000", "--set", "estimator.nu_method.iterations=200"}),
            kExitNumerical);
}
