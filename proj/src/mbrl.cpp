#include "simpel/mbrl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "simpel/eval.hpp"

namespace simpel {

Environment::Environment(SimulatorModel truth) : truth_(std::move(truth)) {
  if (!truth_.is_dynamical()) throw ConfigError("the environment must be a dynamical system");
  truth_.fixed_params();
}

Vector Environment::step(const Vector& state, const Vector& action) const {
  if (state.size() != state_dim() || action.size() != action_dim()) {
    throw ShapeError("environment step: state/action dimension mismatch");
  }
  Vector x(state.size() + action.size());
  x << state, action;
  return truth_.evaluate(x, truth_.fixed_params());
}

SimulatorDynamics::SimulatorDynamics(SimulatorModel sim, Vector noise_variance)
    : sim_(std::move(sim)), noise_variance_(std::move(noise_variance)) {
  sim_.fixed_params();
  if (noise_variance_.size() != sim_.output_dim()) throw ShapeError("noise variance dimension");
}

Matrix SimulatorDynamics::particle_mean(int particle, const Matrix& X) const {
  if (particle != 0) throw InvalidInputError("simulator dynamics have a single particle");
  return sim_.evaluate_batch(X, sim_.fixed_params());
}

// ---------------------------------------------------------------------------

std::string to_string(RewardKind kind) {
  return kind == RewardKind::kPendulumSwingUp ? "pendulum-swingup" : "bicycle-parking";
}

RewardKind parse_reward_kind(std::string_view name) {
  if (name == "pendulum-swingup") return RewardKind::kPendulumSwingUp;
  if (name == "bicycle-parking") return RewardKind::kBicycleParking;
  throw ConfigError("unknown reward '" + std::string(name) + "'");
}

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle + std::numbers::pi, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a - std::numbers::pi;
}

double RewardConfig::operator()(const Vector& state, const Vector& action) const {
  const double effort = action_weight * action.squaredNorm();
  if (kind == RewardKind::kPendulumSwingUp) {
    const double phi = wrap_angle(state(0));
    return -phi * phi - velocity_weight * state(1) * state(1) - effort;
  }
  const double dx = state(0) - target(0);
  const double dy = state(1) - target(1);
  const double dh = wrap_angle(state(2) - target(2));
  return -(dx * dx + dy * dy) - dh * dh - velocity_weight * state(3) * state(3) - effort;
}

std::string to_string(Propagation mode) {
  return mode == Propagation::kTsInfinity ? "ts-inf" : "ts-1";
}

Propagation parse_propagation(std::string_view name) {
  if (name == "ts-inf") return Propagation::kTsInfinity;
  if (name == "ts-1") return Propagation::kTs1;
  throw ConfigError("unknown propagation mode '" + std::string(name) + "'");
}

void PlannerConfig::validate(int action_dim, int episode_length) const {
  if (horizon < 1) throw ConfigError("planning horizon must be >= 1");
  if (horizon > episode_length) throw ConfigError("planning horizon exceeds the episode length");
  if (population < 1) throw ConfigError("population must be >= 1");
  if (elites < 1 || elites > population) throw ConfigError("elites must lie in [1, population]");
  if (iterations < 1) throw ConfigError("CEM iterations must be >= 1");
  if (rollouts < 1) throw ConfigError("need at least one rollout per candidate");
  if (action_lower.size() != action_dim || action_upper.size() != action_dim) {
    throw ConfigError("action bounds do not match the action dimension");
  }
  if ((action_upper.array() < action_lower.array()).any()) throw ConfigError("action bounds inverted");
  if (!(initial_std > 0.0)) throw ConfigError("initial CEM std must be positive");
  if (rollout_noise < 0.0) throw ConfigError("rollout noise must be nonnegative");
  if (!(divergence_bound > 0.0)) throw ConfigError("divergence bound must be positive");
}

// ---------------------------------------------------------------------------

RolloutResult trajectory_sampling_rollout(const FittedModel& model, const RewardConfig& reward,
                                          const Vector& start,
                                          const std::vector<Matrix>& sequences,
                                          const std::vector<std::vector<int>>& particles,
                                          const std::vector<Matrix>& noise,
                                          const PlannerConfig& config) {
  const int ds = static_cast<int>(start.size());
  if (model.output_dim() != ds) throw ShapeError("model output does not match the state");
  if (sequences.empty()) throw InvalidInputError("no action sequences to evaluate");
  const int horizon = static_cast<int>(sequences.front().rows());
  const int da = static_cast<int>(sequences.front().cols());
  if (horizon < 1) throw InvalidInputError("rollout horizon must be >= 1");
  if (model.input_dim() != ds + da) throw ShapeError("model input does not match state + action");
  const int C = static_cast<int>(sequences.size());
  const int R = static_cast<int>(particles.size());
  if (R < 1) throw InvalidInputError("need at least one rollout");
  for (const auto& s : sequences) {
    if (s.rows() != horizon || s.cols() != da) throw ShapeError("action sequences differ in shape");
  }
  for (const auto& p : particles) {
    if (static_cast<int>(p.size()) < horizon) throw ShapeError("particle schedule shorter than horizon");
    for (int idx : p) {
      if (idx < 0 || idx >= model.num_particles()) throw InvalidInputError("particle index out of range");
    }
  }
  const bool noisy = config.rollout_noise > 0.0;
  if (noisy && static_cast<int>(noise.size()) != R) throw ShapeError("need one noise matrix per rollout");

  const int N = C * R;  // trajectory n = c * R + r
  Matrix states = start.transpose().replicate(N, 1);
  std::vector<char> alive(N, 1);
  std::vector<double> totals(N, 0.0);
  RolloutResult result;
  result.first_states.assign(R, Matrix(horizon + 1, ds));
  for (int r = 0; r < R; ++r) result.first_states[r].row(0) = start.transpose();

  const int L = model.num_particles();
  std::vector<std::vector<int>> groups(L);
  for (int t = 0; t < horizon; ++t) {
    for (auto& g : groups) g.clear();
    for (int n = 0; n < N; ++n) {
      if (alive[n]) groups[particles[n % R][t]].push_back(n);
    }
    Matrix next = states;
    for (int p = 0; p < L; ++p) {
      const auto& rows = groups[p];
      if (rows.empty()) continue;
      Matrix X(static_cast<Eigen::Index>(rows.size()), ds + da);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const int n = rows[i];
        X.row(i) << states.row(n), sequences[n / R].row(t);
      }
      const Matrix Y = model.particle_mean(p, X);
      for (std::size_t i = 0; i < rows.size(); ++i) next.row(rows[i]) = Y.row(i);
    }
    for (int n = 0; n < N; ++n) {
      if (!alive[n]) {
        totals[n] += config.divergence_penalty;
        continue;
      }
      if (noisy) next.row(n) += config.rollout_noise * noise[n % R].row(t);
      const bool ok = next.row(n).allFinite() &&
                      next.row(n).cwiseAbs().maxCoeff() <= config.divergence_bound;
      if (!ok) {
        alive[n] = 0;
        ++result.diverged;
        totals[n] += config.divergence_penalty;
        next.row(n) = states.row(n);
        continue;
      }
      const Vector s = next.row(n).transpose();
      const Vector a = sequences[n / R].row(t).transpose();
      totals[n] += reward(s, a);
    }
    states = next;
    for (int r = 0; r < R; ++r) result.first_states[r].row(t + 1) = states.row(r);
  }
  result.returns.assign(C, 0.0);
  for (int n = 0; n < N; ++n) result.returns[n / R] += totals[n] / R;
  return result;
}

// ---------------------------------------------------------------------------

CemPlanner::CemPlanner(PlannerConfig config, int action_dim)
    : config_(std::move(config)), action_dim_(action_dim) {
  reset();
}

void CemPlanner::reset() {
  const Vector mid = 0.5 * (config_.action_lower + config_.action_upper);
  mean_ = mid.transpose().replicate(config_.horizon, 1);
}

PlanResult CemPlanner::plan(const FittedModel& model, const RewardConfig& reward,
                            const Vector& state, Rng& rng) {
  const int H = config_.horizon;
  const int da = action_dim_;
  const int ds = static_cast<int>(state.size());
  const Vector lo = config_.action_lower;
  const Vector hi = config_.action_upper;
  const auto clip = [&](Matrix& seq) {
    for (int t = 0; t < H; ++t) seq.row(t) = seq.row(t).cwiseMax(lo.transpose()).cwiseMin(hi.transpose());
  };

  // Common random numbers: the particle schedule and rollout noise are fixed
  // for the whole call, so every candidate faces the same model draws.
  const int L = model.num_particles();
  const int R = config_.rollouts;
  std::vector<int> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> particles(R, std::vector<int>(H));
  std::uniform_int_distribution<int> pick(0, L - 1);
  for (int r = 0; r < R; ++r) {
    for (int t = 0; t < H; ++t) {
      particles[r][t] = config_.propagation == Propagation::kTsInfinity ? order[r % L] : pick(rng);
    }
  }
  std::vector<Matrix> noise;
  if (config_.rollout_noise > 0.0) {
    for (int r = 0; r < R; ++r) noise.push_back(standard_normal(H, ds, rng));
  }

  Matrix mean = mean_;
  Matrix stdev = (config_.initial_std * (hi - lo)).transpose().replicate(H, 1);
  std::vector<Matrix> elites;
  std::vector<double> elite_returns;
  PlanResult out;
  int last_diverged = 0;
  int last_total = 0;

  for (int it = 0; it < config_.iterations; ++it) {
    std::vector<Matrix> candidates;
    candidates.reserve(config_.population);
    for (int c = 0; c < config_.population; ++c) {
      Matrix seq = mean + stdev.cwiseProduct(standard_normal(H, da, rng));
      clip(seq);
      candidates.push_back(std::move(seq));
    }
    const RolloutResult rolled =
        trajectory_sampling_rollout(model, reward, state, candidates, particles, noise, config_);
    last_diverged = rolled.diverged;
    last_total = static_cast<int>(candidates.size()) * R;

    // Previous elites stay in the pool with their (deterministic) returns.
    std::vector<Matrix> pool = std::move(elites);
    std::vector<double> pool_returns = std::move(elite_returns);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      pool.push_back(std::move(candidates[c]));
      pool_returns.push_back(rolled.returns[c]);
    }
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto E = static_cast<std::size_t>(config_.elites);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return pool_returns[a] > pool_returns[b]; });
    elites.clear();
    elite_returns.clear();
    for (std::size_t e = 0; e < E; ++e) {
      elites.push_back(pool[idx[e]]);
      elite_returns.push_back(pool_returns[idx[e]]);
    }
    out.elite_mean_returns.push_back(
        std::accumulate(elite_returns.begin(), elite_returns.end(), 0.0) / static_cast<double>(E));

    mean.setZero();
    for (const auto& e : elites) mean += e;
    mean /= static_cast<double>(E);
    Matrix var = Matrix::Zero(H, da);
    for (const auto& e : elites) var += (e - mean).array().square().matrix();
    stdev = (var / static_cast<double>(E)).cwiseSqrt();
  }

  out.all_diverged = last_total > 0 && last_diverged == last_total;
  out.mean_sequence = mean;
  if (out.all_diverged) {
    out.action = Vector::Zero(da).cwiseMax(lo).cwiseMin(hi);
  } else {
    out.action = mean.row(0).transpose().cwiseMax(lo).cwiseMin(hi);
  }
  // Warm start: shift the plan by one step and pad with the box midpoint.
  if (H > 1) mean_.topRows(H - 1) = mean.bottomRows(H - 1);
  mean_.row(H - 1) = (0.5 * (lo + hi)).transpose();
  return out;
}

// ---------------------------------------------------------------------------

Dataset transitions_to_dataset(const std::vector<Transition>& buffer) {
  if (buffer.empty()) return {};
  const auto ds = buffer.front().state.size();
  const auto da = buffer.front().action.size();
  Dataset d{Matrix(static_cast<Eigen::Index>(buffer.size()), ds + da),
            Matrix(static_cast<Eigen::Index>(buffer.size()), ds)};
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto& tr = buffer[i];
    if (tr.state.size() != ds || tr.action.size() != da || tr.next_state.size() != ds) {
      throw ShapeError("transition dimensions differ within the buffer");
    }
    d.X.row(static_cast<Eigen::Index>(i)) << tr.state.transpose(), tr.action.transpose();
    d.y.row(static_cast<Eigen::Index>(i)) = tr.next_state.transpose();
  }
  return d;
}

namespace {

void write_transition_header(std::ostream& os, Eigen::Index ds, Eigen::Index da) {
  os << "episode,step";
  for (Eigen::Index i = 0; i < ds; ++i) os << ",state_" << i;
  for (Eigen::Index i = 0; i < da; ++i) os << ",action_" << i;
  for (Eigen::Index i = 0; i < ds; ++i) os << ",next_state_" << i;
  os << ",reward\n";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidInputError("cannot write '" + path + "'");
  return os;
}

}  // namespace

void write_transitions(const std::string& path, const std::vector<Transition>& buffer) {
  auto os = open_out(path);
  const Eigen::Index ds = buffer.empty() ? 0 : buffer.front().state.size();
  const Eigen::Index da = buffer.empty() ? 0 : buffer.front().action.size();
  write_transition_header(os, ds, da);
  for (const auto& tr : buffer) {
    os << tr.episode << ',' << tr.step;
    for (double v : tr.state) os << ',' << format_double(v);
    for (double v : tr.action) os << ',' << format_double(v);
    for (double v : tr.next_state) os << ',' << format_double(v);
    os << ',' << format_double(tr.reward) << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const std::vector<Transition>& transitions) {
  write_transitions(path, transitions);
}

std::vector<Transition> read_transitions(const std::string& path, int state_dim, int action_dim) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open transition buffer '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw CorruptArtifactError("transition buffer '" + path + "' is empty");
  const int expected = 2 + 2 * state_dim + action_dim + 1;
  std::vector<Transition> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        fields.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw CorruptArtifactError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(fields.size()) != expected) {
      throw CorruptArtifactError(path + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(expected) + " fields");
    }
    Transition tr;
    tr.episode = static_cast<int>(fields[0]);
    tr.step = static_cast<int>(fields[1]);
    int k = 2;
    tr.state = Eigen::Map<Vector>(fields.data() + k, state_dim);
    k += state_dim;
    tr.action = Eigen::Map<Vector>(fields.data() + k, action_dim);
    k += action_dim;
    tr.next_state = Eigen::Map<Vector>(fields.data() + k, state_dim);
    k += state_dim;
    tr.reward = fields[k];
    out.push_back(std::move(tr));
  }
  return out;
}

// ---------------------------------------------------------------------------

void RlTask::validate() const {
  task.validate();
  if (!task.low_fidelity.is_dynamical()) throw ConfigError("RL needs a dynamical system");
  if (episode_length < 1) throw ConfigError("episode length must be >= 1");
  if (start_state.size() != task.low_fidelity.state_dim()) throw ConfigError("start state dimension");
  if (reward.kind == RewardKind::kPendulumSwingUp && task.system != SystemKind::kPendulum) {
    throw ConfigError("the swing-up reward needs the pendulum");
  }
  if (reward.kind == RewardKind::kBicycleParking) {
    if (task.system != SystemKind::kBicycle) throw ConfigError("the parking reward needs the bicycle");
    if (reward.target.size() != 3) throw ConfigError("the parking target is [x, y, heading]");
  }
  planner.validate(task.low_fidelity.action_dim(), episode_length);
}

RlTask default_rl_task(SystemKind system) {
  RlTask t;
  t.task = default_task(system);
  switch (system) {
    case SystemKind::kPendulum: {
      // Hanging start; the angle is not wrapped, so the box spans both
      // upright equilibria at 0 and 2 pi.
      t.task.domain.lower = Eigen::Vector3d(-1.0, -10.0, -1.0);
      t.task.domain.upper = Eigen::Vector3d(2.0 * std::numbers::pi + 1.0, 10.0, 1.0);
      t.start_state = Eigen::Vector2d(std::numbers::pi, 0.0);
      t.reward.kind = RewardKind::kPendulumSwingUp;
      t.planner.action_lower = Vector::Constant(1, -1.0);
      t.planner.action_upper = Vector::Constant(1, 1.0);
      break;
    }
    case SystemKind::kBicycle: {
      // Park 2 m to the side, turned around.
      t.task.domain.lower(2) = -1.5 * std::numbers::pi;
      t.task.domain.upper(2) = 1.5 * std::numbers::pi;
      t.start_state = Vector::Zero(4);
      t.reward.kind = RewardKind::kBicycleParking;
      t.reward.target = Eigen::Vector3d(0.0, 2.0, std::numbers::pi);
      t.planner.action_lower = Eigen::Vector2d(-kMaxSteering, -1.0);
      t.planner.action_upper = Eigen::Vector2d(kMaxSteering, 1.0);
      break;
    }
    case SystemKind::kSinusoid:
      throw ConfigError("the sinusoid has no RL task");
  }
  return t;
}

EpisodeResult run_episode(const FittedModel& model, const Environment& env, const RlTask& task,
                          int episode_index, std::uint64_t seed) {
  CemPlanner planner(task.planner, env.action_dim());
  Rng rng(seed);
  EpisodeResult out;
  Vector state = task.start_state;
  for (int t = 0; t < task.episode_length; ++t) {
    const PlanResult plan = planner.plan(model, task.reward, state, rng);
    out.planner_failed = out.planner_failed || plan.all_diverged;
    Transition tr;
    tr.state = state;
    tr.action = plan.action;
    tr.next_state = env.step(state, plan.action);
    tr.reward = task.reward(tr.next_state, tr.action);
    tr.episode = episode_index;
    tr.step = t;
    out.total_reward += tr.reward;
    state = tr.next_state;
    out.transitions.push_back(std::move(tr));
  }
  return out;
}

double zero_action_return(const Environment& env, const RlTask& task) {
  const Vector zero = Vector::Zero(env.action_dim());
  Vector state = task.start_state;
  double total = 0.0;
  for (int t = 0; t < task.episode_length; ++t) {
    state = env.step(state, zero);
    total += task.reward(state, zero);
  }
  return total;
}

namespace {

// Energy pumping with a linear catch near upright, on nominal parameters.
Vector scripted_pendulum(const Vector& s, const RlTask& task) {
  const PendulumParams p = PendulumParams::from(task.task.low_fidelity.prior().midpoint());
  const double phi = wrap_angle(s(0));
  double u;
  if (std::abs(phi) < 0.5) {
    u = -(5.0 * phi + 1.0 * s(1));
  } else {
    const double energy = 0.5 * p.inertia * s(1) * s(1) + p.mass * kGravity * p.length * std::cos(phi);
    const double target = p.mass * kGravity * p.length;
    u = 2.0 * s(1) * (target - energy);
  }
  return Vector::Constant(1, u);
}

// Steer toward the target point, slow down on arrival.
Vector scripted_bicycle(const Vector& s, const RlTask& task) {
  const Vector& g = task.reward.target;
  const double dx = g(0) - s(0);
  const double dy = g(1) - s(1);
  const double dist = std::hypot(dx, dy);
  const double heading_err = wrap_angle(std::atan2(dy, dx) - s(2));
  const double steer = std::clamp(1.5 * heading_err, -kMaxSteering, kMaxSteering);
  const double speed_target = std::min(1.0, dist);
  return Eigen::Vector2d(steer, 1.0 * (speed_target - s(3)));
}

}  // namespace

std::vector<Transition> generate_offline_buffer(const Environment& env, const RlTask& task,
                                                int num_transitions, std::uint64_t seed) {
  if (num_transitions < 1) throw ConfigError("offline buffer size must be >= 1");
  task.validate();
  Rng rng(seed);
  const Vector& lo = task.planner.action_lower;
  const Vector& hi = task.planner.action_upper;
  const double noise_std = 0.3;
  std::vector<Transition> buffer;
  for (int episode = 0; static_cast<int>(buffer.size()) < num_transitions; ++episode) {
    const bool scripted = episode % 2 == 0;
    Vector state = task.start_state;
    for (int i = 0; i < state.size(); ++i) state(i) += uniform(-0.1, 0.1, rng);
    for (int t = 0; t < task.episode_length && static_cast<int>(buffer.size()) < num_transitions; ++t) {
      Vector a(lo.size());
      if (scripted) {
        a = task.reward.kind == RewardKind::kPendulumSwingUp ? scripted_pendulum(state, task)
                                                             : scripted_bicycle(state, task);
        a += noise_std * (hi - lo).cwiseProduct(standard_normal(lo.size(), 1, rng)) / 2.0;
      } else {
        for (int i = 0; i < a.size(); ++i) a(i) = uniform(lo(i), hi(i), rng);
      }
      a = a.cwiseMax(lo).cwiseMin(hi);
      Transition tr{state, a, env.step(state, a), 0.0, episode, t};
      tr.reward = task.reward(tr.next_state, a);
      state = tr.next_state;
      buffer.push_back(std::move(tr));
    }
  }
  return buffer;
}

RlModelChoice parse_rl_model(std::string_view name) {
  if (name == "oracle") return {true, Method::kSimpel};
  return {false, parse_method(name)};
}

void EpisodicConfig::validate() const {
  if (episodes < 1) throw ConfigError("need at least one episode");
  if (initial_iterations < 0 || iterations_per_episode < 0) {
    throw ConfigError("training iterations must be nonnegative");
  }
}

namespace {

std::unique_ptr<FittedModel> oracle_model(const RlTask& task) {
  return std::make_unique<SimulatorDynamics>(task.task.truth, task.task.noise_variance());
}

double buffer_nll(const FittedModel& model, const Dataset& data) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  return nll(model.predict(data.X), data.y);
}

bool is_functional(Method m) {
  return m == Method::kSimpel || m == Method::kSimpelOnlySim || m == Method::kFsvgd;
}

}  // namespace

OfflineResult run_offline_rl(const std::vector<Transition>& buffer, RlModelChoice model,
                             const RlTask& task, const MethodConfig& method_config,
                             std::uint64_t seed) {
  if (buffer.empty()) throw InvalidInputError("offline RL needs a nonempty buffer");
  task.validate();
  const Dataset data = transitions_to_dataset(buffer);
  if (data.X.cols() != task.task.input_dim()) throw ShapeError("buffer does not match the task");
  const Environment env(task.task.truth);
  const auto fitted = model.oracle ? oracle_model(task)
                                   : fit_method(model.method, task.task, data, method_config,
                                                derive_seed(seed, 0));
  OfflineResult out;
  out.train_nll = buffer_nll(*fitted, data);
  out.episode = run_episode(*fitted, env, task, 0, derive_seed(seed, 1));
  out.total_reward = out.episode.total_reward;
  return out;
}

std::vector<EpisodeLog> run_episodic_rl(const RlTask& task, RlModelChoice model,
                                        const MethodConfig& method_config,
                                        const EpisodicConfig& config, std::uint64_t seed,
                                        bool record_timing, std::vector<Transition>* trajectories,
                                        const std::string& checkpoint_path) {
  task.validate();
  config.validate();
  method_config.validate();
  const Environment env(task.task.truth);
  std::vector<Transition> buffer;
  std::vector<EpisodeLog> logs;

  std::unique_ptr<FittedModel> fitted;
  ParticleEnsemble* ensemble = nullptr;
  if (model.oracle) {
    fitted = oracle_model(task);
  } else if (is_functional(model.method)) {
    // Trained on the prior alone before any data exists.
    MethodConfig init = method_config;
    init.fsvgd.iterations = config.initial_iterations;
    fitted = fit_method(model.method, task.task, Dataset{}, init, derive_seed(seed, 0));
    ensemble = dynamic_cast<ParticleEnsemble*>(fitted.get());
  }

  for (int e = 0; e < config.episodes; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset data = transitions_to_dataset(buffer);
    const std::uint64_t train_seed = derive_seed(seed, 100 + static_cast<std::uint64_t>(e));
    if (!model.oracle) {
      if (ensemble != nullptr) {
        if (e > 0) {
          continue_training(*ensemble, model.method, task.task, data, method_config,
                            config.iterations_per_episode, train_seed);
        }
      } else if (!data.empty()) {
        fitted = fit_method(model.method, task.task, data, method_config, train_seed);
      }
    }
    EpisodeLog row;
    row.episode = e;
    row.buffer_size = static_cast<int>(buffer.size());
    EpisodeResult ep;
    if (fitted) {
      row.train_nll = buffer_nll(*fitted, data);
      try {
        ep = run_episode(*fitted, env, task, e, derive_seed(seed, 200 + static_cast<std::uint64_t>(e)));
      } catch (const NumericalError&) {
        // A failed episode records the penalty return and the loop continues.
        ep = {};
        ep.total_reward = task.planner.divergence_penalty * task.episode_length;
      }
    } else {
      // Weight-space and parametric methods cannot act before seeing data:
      // the first episode uses uniform random actions.
      row.train_nll = std::numeric_limits<double>::quiet_NaN();
      Rng rng(derive_seed(seed, 200 + static_cast<std::uint64_t>(e)));
      Vector state = task.start_state;
      for (int t = 0; t < task.episode_length; ++t) {
        Vector a(env.action_dim());
        for (int i = 0; i < a.size(); ++i) {
          a(i) = uniform(task.planner.action_lower(i), task.planner.action_upper(i), rng);
        }
        Transition tr{state, a, env.step(state, a), 0.0, e, t};
        tr.reward = task.reward(tr.next_state, a);
        ep.total_reward += tr.reward;
        state = tr.next_state;
        ep.transitions.push_back(std::move(tr));
      }
    }
    row.total_reward = ep.total_reward;
    for (auto& tr : ep.transitions) {
      if (trajectories) trajectories->push_back(tr);
      buffer.push_back(std::move(tr));
    }
    if (record_timing) {
      row.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    logs.push_back(row);
  }
  if (!checkpoint_path.empty()) {
    if (const auto* particles = dynamic_cast<const ParticleEnsemble*>(fitted.get())) {
      save_checkpoint(checkpoint_path, *particles);
    }
  }
  return logs;
}

int episodes_to_fraction(const std::vector<double>& returns, double zero_return,
                         double oracle_return, double fraction) {
  const double span = oracle_return - zero_return;
  if (!(span > 0.0)) throw InvalidInputError("oracle return must exceed the zero-action return");
  for (std::size_t i = 0; i < returns.size(); ++i) {
    if ((returns[i] - zero_return) / span >= fraction) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(returns.size()) + 1;
}

void write_episode_log(const std::string& path, const std::vector<EpisodeLog>& rows) {
  auto os = open_out(path);
  os << "episode,return,buffer_size,train_nll,wall_time_s\n";
  for (const auto& r : rows) {
    os << r.episode << ',' << format_double(r.total_reward) << ',' << r.buffer_size << ','
       << format_double(r.train_nll) << ',' << format_double(r.wall_time_s) << '\n';
  }
}

}  // namespace simpel
