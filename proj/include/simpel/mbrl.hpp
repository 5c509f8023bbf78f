#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simpel/ensemble.hpp"
#include "simpel/simulators.hpp"
#include "simpel/tasks.hpp"

namespace simpel {

/// The real system. Closed-loop evaluation steps only this object, never a
/// learned model.
class Environment {
 public:
  explicit Environment(SimulatorModel truth);

  int state_dim() const { return truth_.state_dim(); }
  int action_dim() const { return truth_.action_dim(); }
  Vector step(const Vector& state, const Vector& action) const;

 private:
  SimulatorModel truth_;
};

/// A simulator with fixed parameters presented as a one-particle model
/// (used as the oracle dynamics and the planner-on-true-model reference).
class SimulatorDynamics final : public FittedModel {
 public:
  SimulatorDynamics(SimulatorModel sim, Vector noise_variance);

  int input_dim() const override { return sim_.input_dim(); }
  int output_dim() const override { return sim_.output_dim(); }
  int num_particles() const override { return 1; }
  Matrix particle_mean(int particle, const Matrix& X) const override;
  Vector noise_variance() const override { return noise_variance_; }

 private:
  SimulatorModel sim_;
  Vector noise_variance_;
};

enum class RewardKind { kPendulumSwingUp, kBicycleParking };

std::string to_string(RewardKind kind);
RewardKind parse_reward_kind(std::string_view name);

/// Pendulum: -wrap(phi)^2 - 0.1 phi_dot^2 - 0.01 u^2 (upright is phi = 0).
/// Bicycle: -|p - p*|^2 - wrap(heading - heading*)^2 - 0.1 v^2 - 0.01 |a|^2.
struct RewardConfig {
  RewardKind kind = RewardKind::kPendulumSwingUp;
  Vector target;                  // bicycle: [x*, y*, heading*]
  double velocity_weight = 0.1;
  double action_weight = 0.01;

  double operator()(const Vector& state, const Vector& action) const;
};

double wrap_angle(double angle);

enum class Propagation { kTsInfinity, kTs1 };

std::string to_string(Propagation mode);
Propagation parse_propagation(std::string_view name);

struct PlannerConfig {
  int horizon = 25;
  int population = 100;
  int elites = 10;
  int iterations = 3;
  int rollouts = 5;                 // particle rollouts per candidate sequence
  Vector action_lower;
  Vector action_upper;
  double initial_std = 0.5;         // fraction of the action range
  Propagation propagation = Propagation::kTsInfinity;
  double rollout_noise = 0.0;       // std of Gaussian noise added per step
  double divergence_bound = 1e3;    // state magnitude treated as divergence
  double divergence_penalty = -100.0;  // reward for each remaining step after divergence

  void validate(int action_dim, int episode_length) const;
};

struct RolloutResult {
  /// returns[c] = mean over rollouts of the summed reward of sequence c.
  std::vector<double> returns;
  /// states[r] is (horizon + 1) x d_s for rollout r of the first sequence.
  std::vector<Matrix> first_states;
  int diverged = 0;
};

/// Evaluates action sequences (each horizon x d_a) from one start state.
/// Rollout r is pinned to particles[r] for the whole horizon (TS-inf), or to
/// per-step draws (TS-1); noise[r] (horizon x d_s) holds standard normal
/// draws scaled by rollout_noise. Deterministic given its arguments.
RolloutResult trajectory_sampling_rollout(const FittedModel& model, const RewardConfig& reward,
                                          const Vector& start,
                                          const std::vector<Matrix>& sequences,
                                          const std::vector<std::vector<int>>& particles,
                                          const std::vector<Matrix>& noise,
                                          const PlannerConfig& config);

struct PlanResult {
  Vector action;
  Matrix mean_sequence;
  std::vector<double> elite_mean_returns;  // one per CEM iteration
  bool all_diverged = false;
};

/// Receding-horizon cross-entropy planner with elitism and common random
/// numbers inside each call; warm-starts from the previous plan.
class CemPlanner {
 public:
  CemPlanner(PlannerConfig config, int action_dim);

  PlanResult plan(const FittedModel& model, const RewardConfig& reward, const Vector& state,
                  Rng& rng);
  void reset();
  const PlannerConfig& config() const { return config_; }

 private:
  PlannerConfig config_;
  int action_dim_;
  Matrix mean_;
};

struct Transition {
  Vector state;
  Vector action;
  Vector next_state;
  double reward = 0.0;
  int episode = 0;
  int step = 0;
};

Dataset transitions_to_dataset(const std::vector<Transition>& buffer);
void write_transitions(const std::string& path, const std::vector<Transition>& buffer);
std::vector<Transition> read_transitions(const std::string& path, int state_dim, int action_dim);

struct RlTask {
  TaskConfig task;                 // model-learning side: simulator prior, normalizer, noise
  RewardConfig reward;
  Vector start_state;
  int episode_length = 100;
  PlannerConfig planner;

  void validate() const;
};

RlTask default_rl_task(SystemKind system);

struct EpisodeResult {
  double total_reward = 0.0;
  std::vector<Transition> transitions;
  bool planner_failed = false;     // some planning call saw only diverging rollouts
};

/// Closed-loop episode: plan on the model, act on the environment.
EpisodeResult run_episode(const FittedModel& model, const Environment& env, const RlTask& task,
                          int episode_index, std::uint64_t seed);

/// Return of the all-zero action sequence on the environment.
double zero_action_return(const Environment& env, const RlTask& task);

/// Mixed offline buffer: half the episodes from a noisy scripted controller,
/// half from uniform random actions.
std::vector<Transition> generate_offline_buffer(const Environment& env, const RlTask& task,
                                                int num_transitions, std::uint64_t seed);

/// "oracle" plans on the true simulator; otherwise one of the learning methods.
struct RlModelChoice {
  bool oracle = false;
  Method method = Method::kSimpel;

  std::string name() const { return oracle ? "oracle" : to_string(method); }
};

RlModelChoice parse_rl_model(std::string_view name);

struct EpisodicConfig {
  int episodes = 15;
  int initial_iterations = 1000;       // training before the first episode
  int iterations_per_episode = 500;    // continued training after each episode

  void validate() const;
};

struct EpisodeLog {
  int episode = 0;
  double total_reward = 0.0;
  int buffer_size = 0;
  double train_nll = 0.0;              // NaN while the buffer is empty
  double wall_time_s = 0.0;
};

struct OfflineResult {
  double total_reward = 0.0;
  double train_nll = 0.0;
  EpisodeResult episode;
};

OfflineResult run_offline_rl(const std::vector<Transition>& buffer, RlModelChoice model,
                             const RlTask& task, const MethodConfig& method_config,
                             std::uint64_t seed);

/// Episode loop. Functional methods continue training one ensemble; other
/// methods refit from scratch. A nonempty checkpoint_path receives the final
/// ensemble (particle methods only).
std::vector<EpisodeLog> run_episodic_rl(const RlTask& task, RlModelChoice model,
                                        const MethodConfig& method_config,
                                        const EpisodicConfig& config, std::uint64_t seed,
                                        bool record_timing = true,
                                        std::vector<Transition>* trajectories = nullptr,
                                        const std::string& checkpoint_path = "");

/// First 1-based episode whose progress (R - R_zero) / (R_oracle - R_zero)
/// reaches `fraction`; returns episodes + 1 when never reached.
int episodes_to_fraction(const std::vector<double>& returns, double zero_return,
                         double oracle_return, double fraction = 0.9);

void write_episode_log(const std::string& path, const std::vector<EpisodeLog>& rows);
void write_trajectory_csv(const std::string& path, const std::vector<Transition>& transitions);

}  // namespace simpel
