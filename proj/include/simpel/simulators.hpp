#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simpel/common.hpp"

namespace simpel {

inline constexpr double kGravity = 9.81;
inline constexpr double kDefaultDt = 1.0 / 30.0;
inline constexpr double kDivergenceBound = 1e6;

enum class SystemKind { kSinusoid, kPendulum, kBicycle };
enum class Fidelity { kLow, kHigh };
enum class ParamDistribution { kUniform, kLogUniform };

std::string to_string(SystemKind kind);
std::string to_string(Fidelity fidelity);
std::string to_string(ParamDistribution dist);
SystemKind parse_system_kind(std::string_view name);
Fidelity parse_fidelity(std::string_view name);
ParamDistribution parse_param_distribution(std::string_view name);

/// Named simulator parameters phi, ordered like the prior that produced them.
class SimParams {
 public:
  SimParams() = default;
  SimParams(std::vector<std::string> names, Vector values);

  double get(std::string_view name) const;
  bool has(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  std::vector<std::string> names_;
  Vector values_;
};

struct ParamSpec {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  ParamDistribution distribution = ParamDistribution::kUniform;
};

/// Independent per-parameter prior p(phi). lower == upper is allowed and
/// yields a point mass.
class ParamPrior {
 public:
  ParamPrior() = default;
  explicit ParamPrior(std::vector<ParamSpec> specs);

  SimParams sample(Rng& rng) const;
  bool contains(const SimParams& params) const;
  SimParams clamp(const SimParams& params) const;
  SimParams midpoint() const;

  const std::vector<ParamSpec>& specs() const { return specs_; }
  std::vector<std::string> names() const;
  Eigen::Index size() const { return static_cast<Eigen::Index>(specs_.size()); }

 private:
  std::vector<ParamSpec> specs_;
};

struct PendulumParams {
  double mass = 1.0;
  double length = 0.5;
  double motor_gain = 2.0;
  double inertia = 0.25;

  static PendulumParams from(const SimParams& params);
};

struct BicycleParams {
  double wheelbase = 0.3;
  double motor_gain = 2.0;
  double drag = 0.1;

  static BicycleParams from(const SimParams& params);
};

struct SinusoidParams {
  double amplitude = 1.0;
  double frequency = 1.0;
  double slope = 0.0;

  static SinusoidParams from(const SimParams& params);
};

/// Low-fidelity pendulum field: [phi_dot, (m g l sin(phi) + C_m u) / I].
Eigen::Vector2d pendulum_derivative(const Eigen::Vector2d& state, double u,
                                    const PendulumParams& params);

/// Pendulum with additional viscous damping on the angular acceleration.
Eigen::Vector2d pendulum_high_fidelity_derivative(const Eigen::Vector2d& state, double u,
                                                  const PendulumParams& params,
                                                  double damping);

inline constexpr double kMaxSteering = 1.0471975511965976;  // pi / 3

/// Kinematic single-track bicycle. state = [x, y, heading, v],
/// action = [steering, throttle].
Eigen::Vector4d bicycle_derivative(const Eigen::Vector4d& state, const Eigen::Vector2d& action,
                                   const BicycleParams& params);

/// Bicycle with extra longitudinal drag and speed-dependent understeer.
Eigen::Vector4d bicycle_high_fidelity_derivative(const Eigen::Vector4d& state,
                                                 const Eigen::Vector2d& action,
                                                 const BicycleParams& params, double damping);

double sinusoid_function(const SinusoidParams& params, double x);

/// Smooth additive discrepancy used by the high-fidelity sinusoid.
double sinusoid_high_fidelity_function(const SinusoidParams& params, double x, double damping);

using DerivativeField = std::function<Vector(const Vector& state, const Vector& action)>;

/// One classical RK4 step. Throws DivergenceError when the result leaves the
/// box of magnitude kDivergenceBound or is not finite.
Vector rk4_step(const DerivativeField& field, const Vector& state, const Vector& action,
                double dt);

ParamPrior default_param_prior(SystemKind kind);
SimParams default_true_params(SystemKind kind);
double default_damping(SystemKind kind);

/// Query-access simulator g(x, phi). For dynamical systems the input is the
/// concatenation [state, action] and the output is the next state after one
/// integration step of length dt; the sinusoid maps a scalar to a scalar.
class SimulatorModel {
 public:
  SimulatorModel() = default;
  SimulatorModel(SystemKind system, Fidelity fidelity, ParamPrior prior,
                 double dt = kDefaultDt, std::optional<double> damping = std::nullopt);

  SystemKind system() const { return system_; }
  Fidelity fidelity() const { return fidelity_; }
  double dt() const { return dt_; }
  double damping() const { return damping_; }
  const ParamPrior& prior() const { return prior_; }
  const std::optional<SimParams>& params() const { return params_; }

  SimulatorModel with_params(SimParams params) const;
  SimulatorModel with_fidelity(Fidelity fidelity) const;
  SimulatorModel with_prior(ParamPrior prior) const;

  bool is_dynamical() const { return system_ != SystemKind::kSinusoid; }
  int state_dim() const;
  int action_dim() const;
  int input_dim() const;
  int output_dim() const;

  Vector derivative(const Vector& state, const Vector& action, const SimParams& params) const;

  /// g(x, phi) for a single input row.
  Vector evaluate(const Vector& x, const SimParams& params) const;

  /// g over all rows of X; result is rows x output_dim.
  Matrix evaluate_batch(const Matrix& X, const SimParams& params) const;

  /// Uses the model's fixed params; throws if none were attached.
  const SimParams& fixed_params() const;

  void validate_params(const SimParams& params) const;

 private:
  SystemKind system_ = SystemKind::kSinusoid;
  Fidelity fidelity_ = Fidelity::kLow;
  ParamPrior prior_;
  double dt_ = kDefaultDt;
  double damping_ = 0.0;
  std::optional<SimParams> params_;
};

Vector integrate_step(const SimulatorModel& model, const Vector& state, const Vector& action,
                      double dt);
Vector integrate_step(const SimulatorModel& model, const SimParams& params, const Vector& state,
                      const Vector& action, double dt);

}  // namespace simpel
