#include "simpel/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "simpel/config.hpp"
#include "simpel/ensemble.hpp"
#include "simpel/eval.hpp"
#include "simpel/mbrl.hpp"
#include "simpel/score.hpp"

namespace simpel {

Matrix bimodal_samples(int n, Rng& rng) {
  Matrix out = standard_normal(n, 1, rng) * kBimodalStd;
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < n; ++i) out(i, 0) += coin(rng) ? kBimodalMean : -kBimodalMean;
  return out;
}

Matrix bimodal_score(const Matrix& x) {
  const double s2 = kBimodalStd * kBimodalStd;
  return x.unaryExpr([&](double v) {
    // Responsibility of the right component, computed stably.
    const double logit = 2.0 * kBimodalMean * v / s2;
    const double w = 1.0 / (1.0 + std::exp(-logit));
    return (w * (kBimodalMean - v) + (1.0 - w) * (-kBimodalMean - v)) / s2;
  });
}

namespace {

namespace fs = std::filesystem;

YAML::Node load_with_overrides(const RunOptions& options) {
  if (options.config_path.empty()) throw ConfigError("--config is required");
  YAML::Node root = load_config_file(options.config_path);
  for (const auto& o : options.overrides) apply_override(root, o);
  return root;
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir + "'");
  const fs::path probe = fs::path(dir) / ".write_probe";
  {
    std::ofstream os(probe);
    if (!os) throw ConfigError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
  return fs::path(dir);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix read_sample_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open samples file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        numeric = numeric && used == cell.size();
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw ConfigError(path + ":" + std::to_string(lineno) + ": non-numeric sample");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": ragged sample row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ConfigError("samples file '" + path + "' needs at least two rows");
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return out;
}

}  // namespace

void cmd_score_bench(const RunOptions& options) {
  ScoreBenchConfig c = parse_score_bench(load_with_overrides(options));
  if (options.seed) c.seed = *options.seed;
  const fs::path out = prepare_out_dir(options.out_dir);

  Rng rng(derive_seed(c.seed, 0));
  Matrix samples;
  Matrix queries;
  Matrix oracle;
  if (c.density == "standard_normal") {
    samples = standard_normal(c.num_samples, c.dim, rng);
    if (c.dim == 1) {
      queries = Vector::LinSpaced(c.num_queries, -1.0, 1.0);
    } else {
      Rng qrng(derive_seed(c.seed, 1));
      queries = Matrix(c.num_queries, c.dim);
      for (Eigen::Index i = 0; i < queries.size(); ++i) queries.data()[i] = uniform(-1.0, 1.0, qrng);
    }
    oracle = -queries;
  } else if (c.density == "bimodal") {
    samples = bimodal_samples(c.num_samples, rng);
    queries = Vector::LinSpaced(c.num_queries, -2.0 * kBimodalMean, 2.0 * kBimodalMean);
    oracle = bimodal_score(queries);
  } else {
    samples = read_sample_file(c.samples_file);
    const Vector lo = samples.colwise().minCoeff();
    const Vector hi = samples.colwise().maxCoeff();
    Rng qrng(derive_seed(c.seed, 1));
    queries = Matrix(c.num_queries, samples.cols());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
      for (Eigen::Index j = 0; j < queries.cols(); ++j) queries(i, j) = uniform(lo(j), hi(j), qrng);
    }
    oracle = Matrix::Constant(queries.rows(), queries.cols(), std::nan(""));
  }

  std::ofstream os(out / "score_bench.csv");
  if (!os) throw ConfigError("cannot write score_bench.csv");
  os << "estimator,query_index,dim,query,score,oracle,wall_time_s\n";
  for (EstimatorKind kind : c.estimators) {
    EstimatorConfig e = c.estimator;
    e.kind = kind;
    const auto t0 = std::chrono::steady_clock::now();
    const Matrix score = estimate_score_single(e, samples, queries);
    const double wall = options.record_timing ? seconds_since(t0) : 0.0;
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
      for (Eigen::Index j = 0; j < queries.cols(); ++j) {
        os << to_string(kind) << ',' << i << ',' << j << ',' << format_double(queries(i, j)) << ','
           << format_double(score(i, j)) << ',' << format_double(oracle(i, j)) << ','
           << format_double(wall) << '\n';
      }
    }
  }
}

void cmd_regression(const RunOptions& options) {
  ExperimentSpec spec = parse_experiment(load_with_overrides(options));
  if (options.seed) spec.master_seed = *options.seed;
  if (options.workers) spec.workers = *options.workers;
  spec.record_timing = options.record_timing;
  spec.validate();
  const fs::path out = prepare_out_dir(options.out_dir);
  const auto rows = run_learning_curve(spec, (out / "metrics.csv").string(), options.resume);
  write_summary_json((out / "summary.json").string(), rows);
  int failed = 0;
  for (const auto& r : rows) failed += r.ok() ? 0 : 1;
  if (failed > 0) std::cerr << failed << " of " << rows.size() << " runs failed (see status column)\n";
}

void cmd_rl(const RunOptions& options) {
  RlRunConfig c = parse_rl(load_with_overrides(options));
  if (options.seed) c.master_seed = *options.seed;
  if (options.workers) c.workers = *options.workers;
  c.validate();
  const fs::path out = prepare_out_dir(options.out_dir);
  const Environment env(c.task.task.truth);

  if (c.mode == RlMode::kCollect) {
    parallel_for(c.seeds.size(), c.workers, [&](std::size_t i) {
      const auto buffer = generate_offline_buffer(env, c.task, c.buffer_size,
                                                  derive_seed(c.master_seed, c.seeds[i]));
      write_transitions((out / ("buffer_seed" + std::to_string(c.seeds[i]) + ".csv")).string(), buffer);
    });
    return;
  }

  std::vector<Transition> offline;
  if (c.mode == RlMode::kOffline) {
    if (!fs::exists(c.buffer_path)) throw ConfigError("buffer '" + c.buffer_path + "' does not exist");
    offline = read_transitions(c.buffer_path, env.state_dim(), env.action_dim());
    if (offline.empty()) throw ConfigError("buffer '" + c.buffer_path + "' holds no transitions");
  }

  struct Cell {
    RlModelChoice model;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& m : c.models) {
    for (auto s : c.seeds) cells.push_back({m, s});
  }
  std::vector<std::vector<double>> returns(cells.size());

  parallel_for(cells.size(), c.workers, [&](std::size_t i) {
    const Cell& cell = cells[i];
    const std::uint64_t seed = derive_seed(c.master_seed, cell.seed);
    const std::string stem = cell.model.name() + "_seed" + std::to_string(cell.seed);
    std::vector<EpisodeLog> logs;
    std::vector<Transition> trajectory;
    if (c.mode == RlMode::kOffline) {
      const auto t0 = std::chrono::steady_clock::now();
      const OfflineResult r = run_offline_rl(offline, cell.model, c.task, c.method_config, seed);
      EpisodeLog row;
      row.total_reward = r.total_reward;
      row.buffer_size = static_cast<int>(offline.size());
      row.train_nll = r.train_nll;
      row.wall_time_s = options.record_timing ? seconds_since(t0) : 0.0;
      logs.push_back(row);
      trajectory = r.episode.transitions;
    } else {
      logs = run_episodic_rl(c.task, cell.model, c.method_config, c.episodic, seed,
                             options.record_timing, &trajectory,
                             (out / ("model_" + stem + ".bin")).string());
    }
    write_episode_log((out / ("episodes_" + stem + ".csv")).string(), logs);
    write_trajectory_csv((out / ("trajectories_" + stem + ".csv")).string(), trajectory);
    for (const auto& l : logs) returns[i].push_back(l.total_reward);
  });

  // Reference returns: all-zero actions, and the planner acting on the true
  // simulator.
  const double zero = zero_action_return(env, c.task);
  const SimulatorDynamics truth(c.task.task.truth, c.task.task.noise_variance());
  const double oracle = run_episode(truth, env, c.task, 0, derive_seed(c.master_seed, 0)).total_reward;
  nlohmann::ordered_json summary;
  summary["mode"] = c.mode == RlMode::kOffline ? "offline" : "episodic";
  summary["zero_action_return"] = zero;
  summary["oracle_return"] = oracle;
  summary["runs"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    nlohmann::ordered_json r;
    r["model"] = cells[i].model.name();
    r["seed"] = cells[i].seed;
    r["returns"] = returns[i];
    if (oracle > zero) r["episodes_to_90"] = episodes_to_fraction(returns[i], zero, oracle, 0.9);
    summary["runs"].push_back(std::move(r));
  }
  std::ofstream os(out / "summary.json");
  if (!os) throw ConfigError("cannot write summary.json");
  os << summary.dump(2) << '\n';
}

void cmd_inspect(const std::string& checkpoint_path, std::ostream& os) {
  const ParticleEnsemble e = load_checkpoint(checkpoint_path);
  const auto& arch = e.architecture();
  os << "checkpoint: " << checkpoint_path << '\n';
  os << "architecture: " << arch.input_dim;
  for (int w : arch.hidden) os << " -> " << w;
  os << " -> " << arch.output_dim << " (" << to_string(arch.activation) << ")\n";
  os << "parameters per particle: " << arch.num_params() << '\n';
  os << "particles: " << e.num_particles() << '\n';
  os << "noise variance:";
  for (double v : e.noise_variance()) os << ' ' << format_double(v);
  os << '\n';
  const Normalizer& n = e.normalizer();
  os << "input box:";
  for (Eigen::Index i = 0; i < n.input_lower.size(); ++i) {
    os << " [" << format_double(n.input_lower(i)) << ", " << format_double(n.input_upper(i)) << ']';
  }
  os << '\n';
  os << "output skip: " << (n.output_skip.size() > 0 ? "yes" : "no") << '\n';
  os << "parameter norms:";
  for (const auto& p : e.particles()) os << ' ' << format_double(p.norm());
  os << '\n';
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Simulation-informed priors for Bayesian neural networks"};
  app.require_subcommand(1);
  RunOptions opts;
  std::uint64_t seed = 0;
  int workers = 1;
  bool no_timing = false;
  std::string checkpoint;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "YAML config file")->required();
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--set", opts.overrides, "key=value override (repeatable)");
    sub->add_flag("--no-timing", no_timing, "write 0 wall times for byte-stable output");
  };
  CLI::App* bench = app.add_subcommand("score-bench", "compare score estimators against an oracle");
  add_common(bench);
  CLI::App* reg = app.add_subcommand("regression", "learning curves over methods, sizes and seeds");
  add_common(reg);
  reg->add_flag("--resume", opts.resume, "keep finished rows of an existing metrics.csv");
  CLI::App* rl = app.add_subcommand("rl", "offline or episodic model-based RL");
  add_common(rl);
  CLI::App* inspect = app.add_subcommand("inspect", "print a checkpoint summary");
  inspect->add_option("checkpoint", checkpoint, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  opts.record_timing = !no_timing;
  for (CLI::App* sub : {bench, reg, rl}) {
    if (sub->parsed()) {
      if (sub->count("--seed") > 0) opts.seed = seed;
      if (sub->count("--workers") > 0) opts.workers = workers;
    }
  }

  try {
    if (bench->parsed()) cmd_score_bench(opts);
    if (reg->parsed()) cmd_regression(opts);
    if (rl->parsed()) cmd_rl(opts);
    if (inspect->parsed()) cmd_inspect(checkpoint, std::cout);
  } catch (const CorruptArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCorrupt;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const YAML::Exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace simpel
