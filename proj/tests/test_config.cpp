#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "simpel/config.hpp"

using namespace simpel;

namespace {

const std::string kConfigDir = SIMPEL_CONFIG_DIR;

}  // namespace

TEST(Interpolation, VariablesAndDefaults) {
  ::setenv("SIMPEL_TEST_VAR", "42", 1);
  EXPECT_EQ(interpolate_env("a: ${SIMPEL_TEST_VAR}"), "a: 42");
  EXPECT_EQ(interpolate_env("a: ${SIMPEL_TEST_VAR:-7}"), "a: 42");
  ::unsetenv("SIMPEL_TEST_VAR");
  EXPECT_EQ(interpolate_env("a: ${SIMPEL_TEST_VAR:-7}"), "a: 7");
  EXPECT_THROW(interpolate_env("a: ${SIMPEL_TEST_VAR}"), ConfigError);
  EXPECT_EQ(interpolate_env("no variables"), "no variables");
}

TEST(Overrides, NestedValuesAndLists) {
  YAML::Node root = load_config_string("fsvgd:\n  iterations: 10\n");
  apply_override(root, "fsvgd.iterations=25");
  apply_override(root, "experiment.train_sizes=[1, 2]");
  EXPECT_EQ(root["fsvgd"]["iterations"].as<int>(), 25);
  EXPECT_EQ(root["experiment"]["train_sizes"].size(), 2u);
  EXPECT_THROW(apply_override(root, "no_equals_sign"), ConfigError);
}

TEST(Parsing, UnknownKeysRejected) {
  EXPECT_THROW(parse_method_config(load_config_string("fsvgd:\n  iterationz: 3\n")), ConfigError);
  EXPECT_THROW(parse_task(load_config_string("system: sinusoid\nnoise: 0.1\n")), ConfigError);
  EXPECT_THROW(parse_task(load_config_string("system: cartpole\n")), ConfigError);
  EXPECT_THROW(load_config_string("a: [1, 2"), ConfigError);
}

TEST(Parsing, MethodConfigValues) {
  const MethodConfig mc = parse_method_config(load_config_string(
      "model:\n  hidden: [8, 4]\n  particles: 3\n"
      "fsvgd:\n  iterations: 12\n  learning_rate: 0.02\n  batch_size: 5\n"
      "estimator:\n  kind: nu-method\n  nu_method:\n    iterations: 9\n"));
  EXPECT_EQ(mc.hidden, (std::vector<int>{8, 4}));
  EXPECT_EQ(mc.num_particles, 3);
  EXPECT_EQ(mc.fsvgd.iterations, 12);
  EXPECT_DOUBLE_EQ(mc.fsvgd.optimizer.learning_rate, 0.02);
  EXPECT_EQ(mc.fsvgd.data_batch_size, 5);
  EXPECT_EQ(mc.fsvgd.estimator.kind, EstimatorKind::kNuMethod);
  EXPECT_EQ(mc.fsvgd.estimator.nu_method.iterations, 9);
}

TEST(Parsing, InvalidValuesRejected) {
  EXPECT_THROW(parse_method_config(load_config_string("model:\n  particles: 0\n")), ConfigError);
  EXPECT_THROW(parse_experiment(load_config_string("experiment:\n  methods: [simpel, magic]\n")), ConfigError);
  EXPECT_THROW(parse_rl(load_config_string("planner:\n  elites: 500\n")), ConfigError);
}

TEST(Parsing, RlSection) {
  const RlRunConfig rl = parse_rl(load_config_string(
      "task:\n  system: pendulum\nrl:\n  mode: offline\n  models: [oracle, sysid]\n"
      "  buffer_path: x.csv\n  episode_length: 50\nplanner:\n  horizon: 10\n  propagation: ts-1\n"));
  EXPECT_EQ(rl.mode, RlMode::kOffline);
  ASSERT_EQ(rl.models.size(), 2u);
  EXPECT_TRUE(rl.models[0].oracle);
  EXPECT_EQ(rl.models[1].method, Method::kSysId);
  EXPECT_EQ(rl.task.episode_length, 50);
  EXPECT_EQ(rl.task.planner.propagation, Propagation::kTs1);
}

TEST(ShippedConfigs, AllParse) {
  ::unsetenv("SIMPEL_SEED");
  ::setenv("SIMPEL_BUFFER", "unused.csv", 1);
  for (const auto& entry : std::filesystem::directory_iterator(kConfigDir)) {
    const std::string name = entry.path().filename().string();
    SCOPED_TRACE(name);
    const YAML::Node root = load_config_file(entry.path().string());
    if (name.rfind("score_bench", 0) == 0) {
      EXPECT_NO_THROW(parse_score_bench(root));
    } else if (name.rfind("rl_", 0) == 0) {
      EXPECT_NO_THROW(parse_rl(root));
    } else {
      EXPECT_NO_THROW(parse_experiment(root));
    }
  }
  const ExperimentSpec sin = parse_experiment(load_config_file(kConfigDir + "/sinusoid.yaml"));
  EXPECT_EQ(sin.master_seed, 2024u);
  EXPECT_EQ(sin.seeds.size(), 5u);
}
