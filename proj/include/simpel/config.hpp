#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "simpel/eval.hpp"
#include "simpel/mbrl.hpp"
#include "simpel/score.hpp"
#include "simpel/tasks.hpp"

namespace simpel {

/// Replaces ${VAR} and ${VAR:-default} with environment values. An unset
/// variable without a default is a ConfigError.
std::string interpolate_env(std::string_view text);

/// Reads a YAML file after environment interpolation.
YAML::Node load_config_file(const std::string& path);
YAML::Node load_config_string(const std::string& text);

/// Applies "a.b.c=value"; the value is parsed as a YAML scalar or flow
/// sequence, and intermediate maps are created as needed.
void apply_override(YAML::Node& root, std::string_view assignment);

/// Section parsers. Each starts from the defaults and rejects unknown keys.
TaskConfig parse_task(const YAML::Node& node);
EstimatorConfig parse_estimator(const YAML::Node& node);
OptimizerConfig parse_optimizer(const YAML::Node& node, OptimizerConfig defaults = {});
MethodConfig parse_method_config(const YAML::Node& root);
ExperimentSpec parse_experiment(const YAML::Node& root);

struct ScoreBenchConfig {
  std::string density = "standard_normal";   // standard_normal | bimodal | file
  std::string samples_file;                  // CSV of samples, one row per draw
  int dim = 1;
  int num_samples = 2000;
  int num_queries = 21;
  std::vector<EstimatorKind> estimators{EstimatorKind::kGaussian, EstimatorKind::kKde,
                                        EstimatorKind::kSsge, EstimatorKind::kNuMethod};
  EstimatorConfig estimator;
  std::uint64_t seed = 0;

  void validate() const;
};

ScoreBenchConfig parse_score_bench(const YAML::Node& root);

enum class RlMode { kEpisodic, kOffline, kCollect };

struct RlRunConfig {
  RlMode mode = RlMode::kEpisodic;
  RlTask task;
  std::vector<RlModelChoice> models{{false, Method::kSimpel}};
  std::vector<std::uint64_t> seeds{0};
  MethodConfig method_config;
  EpisodicConfig episodic;
  std::string buffer_path;        // offline: transitions to learn from
  int buffer_size = 200;          // collect: transitions to generate
  std::uint64_t master_seed = 0;
  int workers = 1;

  void validate() const;
};

RlRunConfig parse_rl(const YAML::Node& root);

}  // namespace simpel
