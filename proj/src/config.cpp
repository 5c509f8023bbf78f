#include "simpel/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace simpel {

std::string interpolate_env(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '$' && i + 1 < text.size() && text[i + 1] == '{') {
      const std::size_t close = text.find('}', i + 2);
      if (close == std::string_view::npos) throw ConfigError("unterminated ${ in config");
      const std::string_view body = text.substr(i + 2, close - i - 2);
      const std::size_t sep = body.find(":-");
      const std::string name(body.substr(0, sep));
      if (name.empty()) throw ConfigError("empty variable name in config");
      const char* value = std::getenv(name.c_str());
      if (value != nullptr && *value != '\0') {
        out += value;
      } else if (sep != std::string_view::npos) {
        out += body.substr(sep + 2);
      } else {
        throw ConfigError("environment variable '" + name + "' is not set");
      }
      i = close + 1;
    } else {
      out += text[i++];
    }
  }
  return out;
}

YAML::Node load_config_string(const std::string& text) {
  try {
    YAML::Node node = YAML::Load(interpolate_env(text));
    if (node.IsNull()) return YAML::Node(YAML::NodeType::Map);
    if (!node.IsMap()) throw ConfigError("config root must be a mapping");
    return node;
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

YAML::Node load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return load_config_string(ss.str());
}

void apply_override(YAML::Node& root, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key=value: '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ConfigError("bad override value '" + value + "': " + e.what());
  }
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("empty path segment in override '" + key + "'");
    parts.push_back(part);
  }
  // yaml-cpp nodes are handles; walk by reassignment to create maps lazily.
  std::vector<YAML::Node> chain{root};
  for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
    YAML::Node child = chain.back()[parts[k]];
    if (!child.IsDefined() || child.IsNull()) {
      chain.back()[parts[k]] = YAML::Node(YAML::NodeType::Map);
      child = chain.back()[parts[k]];
    } else if (!child.IsMap()) {
      throw ConfigError("override path '" + key + "' crosses a non-mapping value");
    }
    chain.push_back(child);
  }
  chain.back()[parts.back()] = parsed;
}

namespace {

// Rejects keys outside `allowed` so that typos do not silently fall back to
// defaults.
void check_keys(const YAML::Node& node, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!node || node.IsNull()) return;
  if (!node.IsMap()) throw ConfigError("'" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in '" + section + "'");
  }
}

template <typename T>
T get(const YAML::Node& node, const std::string& key, T fallback) {
  if (!node || !node.IsMap()) return fallback;
  const YAML::Node v = node[key];
  if (!v || v.IsNull()) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

template <typename T>
std::optional<T> get_opt(const YAML::Node& node, const std::string& key, std::optional<T> fallback) {
  if (!node || !node.IsMap()) return fallback;
  const YAML::Node v = node[key];
  if (!v || v.IsNull()) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for '" + key + "'");
  }
}

Vector get_vector(const YAML::Node& node, const std::string& key, const Vector& fallback) {
  if (!node || !node.IsMap()) return fallback;
  const YAML::Node v = node[key];
  if (!v || v.IsNull()) return fallback;
  try {
    if (v.IsScalar()) return Vector::Constant(std::max<Eigen::Index>(fallback.size(), 1), v.as<double>());
    const auto values = v.as<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  } catch (const YAML::Exception&) {
    throw ConfigError("bad vector for '" + key + "'");
  }
}

std::vector<GapKernelConfig> parse_kernels(const YAML::Node& node, const std::string& section,
                                           std::vector<GapKernelConfig> fallback) {
  if (!node || node.IsNull()) return fallback;
  const auto one = [&](const YAML::Node& n) {
    check_keys(n, section, {"variance", "lengthscale", "correlation", "jitter"});
    GapKernelConfig k;
    k.variance = get(n, "variance", k.variance);
    k.lengthscale = get(n, "lengthscale", k.lengthscale);
    k.correlation = parse_correlation(get<std::string>(n, "correlation", to_string(k.correlation)));
    k.jitter = get_opt<double>(n, "jitter", std::nullopt);
    k.validate();
    return k;
  };
  std::vector<GapKernelConfig> out;
  if (node.IsSequence()) {
    for (const auto& n : node) out.push_back(one(n));
  } else {
    out.push_back(one(node));
  }
  return out;
}

template <typename T>
std::vector<T> get_list(const YAML::Node& node, const std::string& key, std::vector<T> fallback) {
  if (!node || !node.IsMap()) return fallback;
  const YAML::Node v = node[key];
  if (!v || v.IsNull()) return fallback;
  try {
    if (v.IsScalar()) return {v.as<T>()};
    return v.as<std::vector<T>>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad list for '" + key + "'");
  }
}

}  // namespace

TaskConfig parse_task(const YAML::Node& node) {
  check_keys(node, "task",
             {"system", "noise_std", "gap", "generic", "domain", "train_box", "measurement_size",
              "output_center", "output_scale", "test_size", "test_seed", "damping", "true_params",
              "dt"});
  const auto system = parse_system_kind(get<std::string>(node, "system", "sinusoid"));
  TaskConfig t = default_task(system);
  if (!node || node.IsNull()) return t;

  const double dt = get(node, "dt", t.low_fidelity.dt());
  const double damping = get(node, "damping", t.truth.damping());
  SimParams truth_params = t.truth.fixed_params();
  if (const YAML::Node tp = node["true_params"]; tp && !tp.IsNull()) {
    if (!tp.IsMap()) throw ConfigError("'true_params' must be a mapping");
    for (const auto& kv : tp) {
      const auto name = kv.first.as<std::string>();
      const auto& names = truth_params.names();
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw ConfigError("unknown simulator parameter '" + name + "'");
      truth_params.values()(it - names.begin()) = kv.second.as<double>();
    }
  }
  t.low_fidelity = SimulatorModel(system, Fidelity::kLow, t.low_fidelity.prior(), dt);
  t.truth = SimulatorModel(system, Fidelity::kHigh, t.low_fidelity.prior(), dt, damping)
                .with_params(truth_params);

  t.noise_std = get_vector(node, "noise_std", t.noise_std);
  t.gap = parse_kernels(node["gap"], "task.gap", t.gap);
  t.generic = parse_kernels(node["generic"], "task.generic", t.generic);
  if (const YAML::Node d = node["domain"]; d && !d.IsNull()) {
    check_keys(d, "task.domain", {"lower", "upper"});
    t.domain.lower = get_vector(d, "lower", t.domain.lower);
    t.domain.upper = get_vector(d, "upper", t.domain.upper);
  }
  t.domain.size = get(node, "measurement_size", t.domain.size);
  if (const YAML::Node b = node["train_box"]; b && !b.IsNull()) {
    check_keys(b, "task.train_box", {"lower", "upper"});
    t.train_lower = get_vector(b, "lower", t.domain.lower);
    t.train_upper = get_vector(b, "upper", t.domain.upper);
  }
  t.output_center = get_vector(node, "output_center", t.output_center);
  t.output_scale = get_vector(node, "output_scale", t.output_scale);
  t.test_size = get(node, "test_size", t.test_size);
  t.test_seed = get(node, "test_seed", t.test_seed);
  t.validate();
  return t;
}

EstimatorConfig parse_estimator(const YAML::Node& node) {
  check_keys(node, "estimator",
             {"kind", "nugget", "nugget_relative", "kde_bandwidth", "ssge", "nu_method"});
  EstimatorConfig e;
  if (!node || node.IsNull()) return e;
  e.kind = parse_estimator_kind(get<std::string>(node, "kind", to_string(e.kind)));
  e.nugget = get_opt<double>(node, "nugget", e.nugget);
  e.nugget_relative = get(node, "nugget_relative", e.nugget_relative);
  e.kde_bandwidth = get_opt<double>(node, "kde_bandwidth", e.kde_bandwidth);
  if (const YAML::Node s = node["ssge"]; s && !s.IsNull()) {
    check_keys(s, "estimator.ssge", {"num_eigen", "eigen_threshold", "eigen_ratio", "bandwidth", "bandwidth_scale"});
    e.ssge.num_eigen = get_opt<int>(s, "num_eigen", e.ssge.num_eigen);
    e.ssge.eigen_threshold = get_opt<double>(s, "eigen_threshold", e.ssge.eigen_threshold);
    e.ssge.eigen_ratio = get(s, "eigen_ratio", e.ssge.eigen_ratio);
    e.ssge.bandwidth = get_opt<double>(s, "bandwidth", e.ssge.bandwidth);
    e.ssge.bandwidth_scale = get(s, "bandwidth_scale", e.ssge.bandwidth_scale);
  }
  if (const YAML::Node n = node["nu_method"]; n && !n.IsNull()) {
    check_keys(n, "estimator.nu_method", {"iterations", "nu", "step", "bandwidth", "bandwidth_scale"});
    e.nu_method.iterations = get(n, "iterations", e.nu_method.iterations);
    e.nu_method.nu = get(n, "nu", e.nu_method.nu);
    e.nu_method.step = get(n, "step", e.nu_method.step);
    e.nu_method.bandwidth = get_opt<double>(n, "bandwidth", e.nu_method.bandwidth);
    e.nu_method.bandwidth_scale = get(n, "bandwidth_scale", e.nu_method.bandwidth_scale);
  }
  e.validate();
  return e;
}

OptimizerConfig parse_optimizer(const YAML::Node& node, OptimizerConfig o) {
  if (!node || node.IsNull()) return o;
  o.kind = parse_optimizer_kind(get<std::string>(node, "optimizer", to_string(o.kind)));
  o.learning_rate = get(node, "learning_rate", o.learning_rate);
  o.momentum = get(node, "momentum", o.momentum);
  o.beta1 = get(node, "beta1", o.beta1);
  o.beta2 = get(node, "beta2", o.beta2);
  o.epsilon = get(node, "epsilon", o.epsilon);
  o.final_lr_ratio = get(node, "final_lr_ratio", o.final_lr_ratio);
  o.validate();
  return o;
}

namespace {

const std::set<std::string> kOptimizerKeys{"optimizer", "learning_rate", "momentum", "beta1",
                                           "beta2",     "epsilon",       "final_lr_ratio"};

std::set<std::string> with_optimizer(std::set<std::string> keys) {
  keys.insert(kOptimizerKeys.begin(), kOptimizerKeys.end());
  return keys;
}

}  // namespace

MethodConfig parse_method_config(const YAML::Node& root) {
  MethodConfig m;
  if (const YAML::Node n = root["model"]; n && !n.IsNull()) {
    check_keys(n, "model", {"hidden", "activation", "particles", "learn_noise", "holdout_fraction"});
    m.hidden = get_list<int>(n, "hidden", m.hidden);
    m.activation = parse_activation(get<std::string>(n, "activation", to_string(m.activation)));
    m.num_particles = get(n, "particles", m.num_particles);
    m.learn_noise = get(n, "learn_noise", m.learn_noise);
    m.holdout_fraction = get(n, "holdout_fraction", m.holdout_fraction);
  }
  if (const YAML::Node n = root["fsvgd"]; n && !n.IsNull()) {
    check_keys(n, "fsvgd",
               with_optimizer({"iterations", "measurement_size", "kernel_bandwidth",
                               "num_prior_samples", "batch_size"}));
    m.fsvgd.optimizer = parse_optimizer(n, m.fsvgd.optimizer);
    m.fsvgd.iterations = get(n, "iterations", m.fsvgd.iterations);
    m.fsvgd.measurement.size = get(n, "measurement_size", m.fsvgd.measurement.size);
    m.fsvgd.kernel_bandwidth = get_opt<double>(n, "kernel_bandwidth", m.fsvgd.kernel_bandwidth);
    m.fsvgd.num_prior_samples = get(n, "num_prior_samples", m.fsvgd.num_prior_samples);
    m.fsvgd.data_batch_size = get_opt<int>(n, "batch_size", m.fsvgd.data_batch_size);
  }
  m.fsvgd.estimator = parse_estimator(root["estimator"]);
  if (const YAML::Node n = root["svgd"]; n && !n.IsNull()) {
    check_keys(n, "svgd",
               with_optimizer({"iterations", "prior_variance", "kernel_bandwidth", "batch_size"}));
    m.svgd.optimizer = parse_optimizer(n, m.svgd.optimizer);
    m.svgd.iterations = get(n, "iterations", m.svgd.iterations);
    m.svgd.prior_variance = get(n, "prior_variance", m.svgd.prior_variance);
    m.svgd.kernel_bandwidth = get_opt<double>(n, "kernel_bandwidth", m.svgd.kernel_bandwidth);
    m.svgd.data_batch_size = get_opt<int>(n, "batch_size", m.svgd.data_batch_size);
  }
  if (const YAML::Node n = root["sysid"]; n && !n.IsNull()) {
    check_keys(n, "sysid", {"starts", "max_iterations", "tolerance"});
    m.sysid.num_starts = get(n, "starts", m.sysid.num_starts);
    m.sysid.max_iterations = get(n, "max_iterations", m.sysid.max_iterations);
    m.sysid.tolerance = get(n, "tolerance", m.sysid.tolerance);
  }
  m.validate();
  return m;
}

namespace {

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

void check_root(const YAML::Node& root, std::set<std::string> extra) {
  std::set<std::string> keys{"task", "model", "fsvgd", "svgd", "sysid", "estimator"};
  keys.insert(extra.begin(), extra.end());
  check_keys(root, "config", keys);
}

}  // namespace

ExperimentSpec parse_experiment(const YAML::Node& root) {
  check_root(root, {"experiment", "method"});
  ExperimentSpec spec;
  spec.task = parse_task(root["task"]);
  spec.method_config = parse_method_config(root);
  const YAML::Node e = root["experiment"];
  check_keys(e, "experiment", {"methods", "train_sizes", "seeds", "master_seed", "workers"});
  std::vector<std::string> names;
  for (Method m : all_methods()) names.push_back(to_string(m));
  names = get_list<std::string>(e, "methods", names);
  // Top-level "method" restricts the run (handy as --set method=sysid).
  names = get_list<std::string>(root, "method", names);
  spec.methods = parse_methods(names);
  spec.train_sizes = get_list<int>(e, "train_sizes", {2});
  spec.seeds = get_list<std::uint64_t>(e, "seeds", {0});
  spec.master_seed = get<std::uint64_t>(e, "master_seed", 0);
  spec.workers = get(e, "workers", 1);
  spec.validate();
  return spec;
}

void ScoreBenchConfig::validate() const {
  if (density != "standard_normal" && density != "bimodal" && density != "file") {
    throw ConfigError("unknown density '" + density + "'");
  }
  if (density == "file" && samples_file.empty()) throw ConfigError("density=file needs samples_file");
  if (density == "bimodal" && dim != 1) throw ConfigError("the bimodal density is one-dimensional");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (num_samples < 2) throw ConfigError("need at least two samples");
  if (num_queries < 1) throw ConfigError("need at least one query");
  if (estimators.empty()) throw ConfigError("no estimators selected");
  estimator.validate();
}

ScoreBenchConfig parse_score_bench(const YAML::Node& root) {
  check_keys(root, "config", {"score_bench", "estimator"});
  ScoreBenchConfig c;
  const YAML::Node n = root["score_bench"];
  check_keys(n, "score_bench",
             {"density", "samples_file", "dim", "num_samples", "num_queries", "estimators", "seed"});
  c.density = get<std::string>(n, "density", c.density);
  c.samples_file = get<std::string>(n, "samples_file", c.samples_file);
  c.dim = get(n, "dim", c.dim);
  c.num_samples = get(n, "num_samples", c.num_samples);
  c.num_queries = get(n, "num_queries", c.num_queries);
  c.seed = get<std::uint64_t>(n, "seed", c.seed);
  std::vector<std::string> names;
  for (EstimatorKind k : c.estimators) names.push_back(to_string(k));
  names = get_list<std::string>(n, "estimators", names);
  c.estimators.clear();
  for (const auto& name : names) c.estimators.push_back(parse_estimator_kind(name));
  c.estimator = parse_estimator(root["estimator"]);
  c.validate();
  return c;
}

void RlRunConfig::validate() const {
  task.validate();
  if (models.empty()) throw ConfigError("no RL models selected");
  if (seeds.empty()) throw ConfigError("no seeds selected");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  method_config.validate();
  episodic.validate();
  if (mode == RlMode::kOffline && buffer_path.empty()) {
    throw ConfigError("offline RL needs rl.buffer_path");
  }
  if (mode == RlMode::kCollect && buffer_size < 1) throw ConfigError("buffer_size must be >= 1");
}

RlRunConfig parse_rl(const YAML::Node& root) {
  check_root(root, {"rl", "planner"});
  RlRunConfig c;
  const YAML::Node n = root["rl"];
  check_keys(n, "rl",
             {"mode", "models", "seeds", "master_seed", "workers", "episodes", "episode_length",
              "initial_iterations", "iterations_per_episode", "buffer_path", "buffer_size",
              "start_state", "target"});
  const std::string mode = get<std::string>(n, "mode", "episodic");
  if (mode == "episodic") {
    c.mode = RlMode::kEpisodic;
  } else if (mode == "offline") {
    c.mode = RlMode::kOffline;
  } else if (mode == "collect") {
    c.mode = RlMode::kCollect;
  } else {
    throw ConfigError("unknown RL mode '" + mode + "'");
  }

  const YAML::Node task_node = root["task"];
  const auto system = parse_system_kind(get<std::string>(task_node, "system", "pendulum"));
  c.task = default_rl_task(system);
  if (task_node && !task_node.IsNull()) {
    // Task keys override the RL defaults (which already widen the domain).
    YAML::Node merged = YAML::Clone(task_node);
    if (!merged["domain"]) {
      YAML::Node d;
      d["lower"] = std::vector<double>(c.task.task.domain.lower.data(),
                                       c.task.task.domain.lower.data() + c.task.task.domain.lower.size());
      d["upper"] = std::vector<double>(c.task.task.domain.upper.data(),
                                       c.task.task.domain.upper.data() + c.task.task.domain.upper.size());
      merged["domain"] = d;
    }
    merged["system"] = to_string(system);
    c.task.task = parse_task(merged);
  }
  c.task.episode_length = get(n, "episode_length", c.task.episode_length);
  c.task.start_state = get_vector(n, "start_state", c.task.start_state);
  c.task.reward.target = get_vector(n, "target", c.task.reward.target);

  const YAML::Node p = root["planner"];
  check_keys(p, "planner",
             {"horizon", "population", "elites", "iterations", "rollouts", "action_lower",
              "action_upper", "initial_std", "propagation", "rollout_noise", "divergence_bound",
              "divergence_penalty"});
  PlannerConfig& pc = c.task.planner;
  pc.horizon = get(p, "horizon", pc.horizon);
  pc.population = get(p, "population", pc.population);
  pc.elites = get(p, "elites", pc.elites);
  pc.iterations = get(p, "iterations", pc.iterations);
  pc.rollouts = get(p, "rollouts", pc.rollouts);
  pc.action_lower = get_vector(p, "action_lower", pc.action_lower);
  pc.action_upper = get_vector(p, "action_upper", pc.action_upper);
  pc.initial_std = get(p, "initial_std", pc.initial_std);
  pc.propagation = parse_propagation(get<std::string>(p, "propagation", to_string(pc.propagation)));
  pc.rollout_noise = get(p, "rollout_noise", pc.rollout_noise);
  pc.divergence_bound = get(p, "divergence_bound", pc.divergence_bound);
  pc.divergence_penalty = get(p, "divergence_penalty", pc.divergence_penalty);

  std::vector<std::string> names{"simpel"};
  names = get_list<std::string>(n, "models", names);
  c.models.clear();
  for (const auto& name : names) c.models.push_back(parse_rl_model(name));
  c.seeds = get_list<std::uint64_t>(n, "seeds", c.seeds);
  c.master_seed = get<std::uint64_t>(n, "master_seed", c.master_seed);
  c.workers = get(n, "workers", c.workers);
  c.episodic.episodes = get(n, "episodes", c.episodic.episodes);
  c.episodic.initial_iterations = get(n, "initial_iterations", c.episodic.initial_iterations);
  c.episodic.iterations_per_episode = get(n, "iterations_per_episode", c.episodic.iterations_per_episode);
  c.buffer_path = get<std::string>(n, "buffer_path", c.buffer_path);
  c.buffer_size = get(n, "buffer_size", c.buffer_size);
  c.method_config = parse_method_config(root);
  c.validate();
  return c;
}

}  // namespace simpel
