#include "simpel/simulators.hpp"

#include <algorithm>
#include <cmath>

namespace simpel {

namespace {

void require_finite_vector(const Vector& v, const char* what) {
  if (!v.allFinite()) throw InvalidInputError(std::string(what) + " must be finite");
}

}  // namespace

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::kSinusoid: return "sinusoid";
    case SystemKind::kPendulum: return "pendulum";
    case SystemKind::kBicycle: return "bicycle";
  }
  return "unknown";
}

std::string to_string(Fidelity fidelity) {
  return fidelity == Fidelity::kLow ? "low" : "high";
}

std::string to_string(ParamDistribution dist) {
  return dist == ParamDistribution::kUniform ? "uniform" : "log-uniform";
}

SystemKind parse_system_kind(std::string_view name) {
  if (name == "sinusoid") return SystemKind::kSinusoid;
  if (name == "pendulum") return SystemKind::kPendulum;
  if (name == "bicycle") return SystemKind::kBicycle;
  throw ConfigError("unknown system '" + std::string(name) + "'");
}

Fidelity parse_fidelity(std::string_view name) {
  if (name == "low") return Fidelity::kLow;
  if (name == "high") return Fidelity::kHigh;
  throw ConfigError("unknown fidelity '" + std::string(name) + "'");
}

ParamDistribution parse_param_distribution(std::string_view name) {
  if (name == "uniform") return ParamDistribution::kUniform;
  if (name == "log-uniform" || name == "log_uniform") return ParamDistribution::kLogUniform;
  throw ConfigError("unknown parameter distribution '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

SimParams::SimParams(std::vector<std::string> names, Vector values)
    : names_(std::move(names)), values_(std::move(values)) {
  if (static_cast<Eigen::Index>(names_.size()) != values_.size()) {
    throw ShapeError("SimParams: names and values differ in length");
  }
}

bool SimParams::has(std::string_view name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

double SimParams::get(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return values_(static_cast<Eigen::Index>(i));
  }
  throw InvalidInputError("missing simulator parameter '" + std::string(name) + "'");
}

ParamPrior::ParamPrior(std::vector<ParamSpec> specs) : specs_(std::move(specs)) {
  for (const auto& s : specs_) {
    if (!std::isfinite(s.lower) || !std::isfinite(s.upper) || s.lower > s.upper) {
      throw ConfigError("parameter '" + s.name + "' needs finite bounds with lower <= upper");
    }
    if (s.distribution == ParamDistribution::kLogUniform && s.lower <= 0.0) {
      throw ConfigError("log-uniform parameter '" + s.name + "' needs a positive lower bound");
    }
  }
}

std::vector<std::string> ParamPrior::names() const {
  std::vector<std::string> out;
  out.reserve(specs_.size());
  for (const auto& s : specs_) out.push_back(s.name);
  return out;
}

SimParams ParamPrior::sample(Rng& rng) const {
  Vector values(size());
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& s = specs_[i];
    double v = s.lower;
    if (s.upper > s.lower) {
      if (s.distribution == ParamDistribution::kUniform) {
        v = uniform(s.lower, s.upper, rng);
      } else {
        v = std::exp(uniform(std::log(s.lower), std::log(s.upper), rng));
      }
      v = std::clamp(v, s.lower, s.upper);
    }
    values(static_cast<Eigen::Index>(i)) = v;
  }
  return SimParams(names(), values);
}

bool ParamPrior::contains(const SimParams& params) const {
  if (params.size() != size()) return false;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const double v = params.values()(static_cast<Eigen::Index>(i));
    if (params.names()[i] != specs_[i].name) return false;
    if (!(v >= specs_[i].lower && v <= specs_[i].upper)) return false;
  }
  return true;
}

SimParams ParamPrior::clamp(const SimParams& params) const {
  Vector values = params.values();
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    auto idx = static_cast<Eigen::Index>(i);
    values(idx) = std::clamp(values(idx), specs_[i].lower, specs_[i].upper);
  }
  return SimParams(names(), values);
}

SimParams ParamPrior::midpoint() const {
  Vector values(size());
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    values(static_cast<Eigen::Index>(i)) = 0.5 * (specs_[i].lower + specs_[i].upper);
  }
  return SimParams(names(), values);
}

PendulumParams PendulumParams::from(const SimParams& p) {
  return {p.get("mass"), p.get("length"), p.get("motor_gain"), p.get("inertia")};
}

BicycleParams BicycleParams::from(const SimParams& p) {
  BicycleParams out;
  out.wheelbase = p.get("wheelbase");
  out.motor_gain = p.get("motor_gain");
  if (p.has("drag")) out.drag = p.get("drag");
  return out;
}

SinusoidParams SinusoidParams::from(const SimParams& p) {
  return {p.get("amplitude"), p.get("frequency"), p.get("slope")};
}

// ---------------------------------------------------------------------------

Eigen::Vector2d pendulum_derivative(const Eigen::Vector2d& state, double u,
                                    const PendulumParams& p) {
  if (!state.allFinite() || !std::isfinite(u)) {
    throw InvalidInputError("pendulum_derivative: non-finite input");
  }
  const double accel = (p.mass * kGravity * p.length * std::sin(state(0)) + p.motor_gain * u) /
                       p.inertia;
  return {state(1), accel};
}

Eigen::Vector2d pendulum_high_fidelity_derivative(const Eigen::Vector2d& state, double u,
                                                  const PendulumParams& p, double damping) {
  if (damping < 0.0) throw InvalidInputError("damping must be nonnegative");
  Eigen::Vector2d d = pendulum_derivative(state, u, p);
  if (damping > 0.0) d(1) -= damping * state(1);
  return d;
}

Eigen::Vector4d bicycle_derivative(const Eigen::Vector4d& state, const Eigen::Vector2d& action,
                                   const BicycleParams& p) {
  if (!state.allFinite() || !action.allFinite()) {
    throw InvalidInputError("bicycle_derivative: non-finite input");
  }
  if (std::abs(action(0)) > kMaxSteering + 1e-12) {
    throw InvalidInputError("bicycle_derivative: steering angle beyond pi/3");
  }
  const double heading = state(2);
  const double v = state(3);
  const double beta = std::atan(std::tan(action(0)) / 2.0);
  return {v * std::cos(heading + beta), v * std::sin(heading + beta),
          (v / p.wheelbase) * std::sin(beta), p.motor_gain * action(1) - p.drag * v};
}

Eigen::Vector4d bicycle_high_fidelity_derivative(const Eigen::Vector4d& state,
                                                 const Eigen::Vector2d& action,
                                                 const BicycleParams& p, double damping) {
  if (damping < 0.0) throw InvalidInputError("damping must be nonnegative");
  Eigen::Vector4d d = bicycle_derivative(state, action, p);
  if (damping > 0.0) {
    const double v = state(3);
    d(2) /= 1.0 + damping * v * v;
    d(3) -= damping * v;
  }
  return d;
}

double sinusoid_function(const SinusoidParams& p, double x) {
  return p.amplitude * std::sin(p.frequency * x) + p.slope * x;
}

double sinusoid_high_fidelity_function(const SinusoidParams& p, double x, double damping) {
  return sinusoid_function(p, x) + damping * std::sin(0.5 * x + 1.0);
}

Vector rk4_step(const DerivativeField& field, const Vector& state, const Vector& action,
                double dt) {
  if (!(dt > 0.0)) throw InvalidInputError("integration step dt must be positive");
  const Vector k1 = field(state, action);
  const Vector k2 = field(state + 0.5 * dt * k1, action);
  const Vector k3 = field(state + 0.5 * dt * k2, action);
  const Vector k4 = field(state + dt * k3, action);
  Vector next = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kDivergenceBound) {
    throw DivergenceError("integration diverged (state magnitude above 1e6)");
  }
  return next;
}

// ---------------------------------------------------------------------------

ParamPrior default_param_prior(SystemKind kind) {
  switch (kind) {
    case SystemKind::kSinusoid:
      return ParamPrior({{"amplitude", 0.5, 2.0}, {"frequency", 1.0, 3.0}, {"slope", -1.0, 1.0}});
    case SystemKind::kPendulum:
      return ParamPrior({{"mass", 0.8, 1.2},
                         {"length", 0.4, 0.6},
                         {"motor_gain", 1.6, 2.4},
                         {"inertia", 0.2, 0.3}});
    case SystemKind::kBicycle:
      return ParamPrior({{"wheelbase", 0.25, 0.35}, {"motor_gain", 1.5, 2.5}});
  }
  throw ConfigError("unknown system");
}

SimParams default_true_params(SystemKind kind) {
  switch (kind) {
    case SystemKind::kSinusoid:
      return SimParams({"amplitude", "frequency", "slope"}, Eigen::Vector3d(1.25, 2.0, 0.25));
    case SystemKind::kPendulum:
      return SimParams({"mass", "length", "motor_gain", "inertia"},
                       Eigen::Vector4d(1.0, 0.5, 2.0, 0.25));
    case SystemKind::kBicycle:
      return SimParams({"wheelbase", "motor_gain"}, Eigen::Vector2d(0.3, 2.0));
  }
  throw ConfigError("unknown system");
}

double default_damping(SystemKind kind) {
  switch (kind) {
    case SystemKind::kSinusoid: return 0.3;
    case SystemKind::kPendulum: return 0.3;
    case SystemKind::kBicycle: return 0.3;
  }
  return 0.0;
}

SimulatorModel::SimulatorModel(SystemKind system, Fidelity fidelity, ParamPrior prior, double dt,
                               std::optional<double> damping)
    : system_(system),
      fidelity_(fidelity),
      prior_(std::move(prior)),
      dt_(dt),
      damping_(damping.value_or(default_damping(system))) {
  if (!(dt_ > 0.0)) throw ConfigError("simulator dt must be positive");
  if (damping_ < 0.0) throw ConfigError("simulator damping must be nonnegative");
  if (system_ != SystemKind::kSinusoid) {
    for (const auto& s : prior_.specs()) {
      if (s.lower <= 0.0) {
        throw ConfigError("physical parameter '" + s.name + "' must be strictly positive");
      }
    }
  }
}

SimulatorModel SimulatorModel::with_params(SimParams params) const {
  SimulatorModel copy = *this;
  copy.validate_params(params);
  copy.params_ = std::move(params);
  return copy;
}

SimulatorModel SimulatorModel::with_fidelity(Fidelity fidelity) const {
  SimulatorModel copy = *this;
  copy.fidelity_ = fidelity;
  return copy;
}

SimulatorModel SimulatorModel::with_prior(ParamPrior prior) const {
  SimulatorModel copy = *this;
  copy.prior_ = std::move(prior);
  return copy;
}

int SimulatorModel::state_dim() const {
  switch (system_) {
    case SystemKind::kSinusoid: return 0;
    case SystemKind::kPendulum: return 2;
    case SystemKind::kBicycle: return 4;
  }
  return 0;
}

int SimulatorModel::action_dim() const {
  switch (system_) {
    case SystemKind::kSinusoid: return 0;
    case SystemKind::kPendulum: return 1;
    case SystemKind::kBicycle: return 2;
  }
  return 0;
}

int SimulatorModel::input_dim() const { return is_dynamical() ? state_dim() + action_dim() : 1; }

int SimulatorModel::output_dim() const { return is_dynamical() ? state_dim() : 1; }

void SimulatorModel::validate_params(const SimParams& params) const {
  if (!params.values().allFinite()) throw InvalidInputError("simulator parameters must be finite");
  if (system_ != SystemKind::kSinusoid && (params.values().array() <= 0.0).any()) {
    throw InvalidInputError("physical simulator parameters must be strictly positive");
  }
}

const SimParams& SimulatorModel::fixed_params() const {
  if (!params_) throw ConfigError("simulator has no fixed parameters attached");
  return *params_;
}

Vector SimulatorModel::derivative(const Vector& state, const Vector& action,
                                  const SimParams& params) const {
  require_finite_vector(state, "state");
  require_finite_vector(action, "action");
  switch (system_) {
    case SystemKind::kPendulum: {
      const auto p = PendulumParams::from(params);
      if (fidelity_ == Fidelity::kLow) return pendulum_derivative(state, action(0), p);
      return pendulum_high_fidelity_derivative(state, action(0), p, damping_);
    }
    case SystemKind::kBicycle: {
      const auto p = BicycleParams::from(params);
      if (fidelity_ == Fidelity::kLow) return bicycle_derivative(state, action, p);
      return bicycle_high_fidelity_derivative(state, action, p, damping_);
    }
    case SystemKind::kSinusoid:
      break;
  }
  throw InvalidInputError("the sinusoid has no state derivative");
}

Vector SimulatorModel::evaluate(const Vector& x, const SimParams& params) const {
  if (x.size() != input_dim()) throw ShapeError("simulator input has wrong dimension");
  require_finite_vector(x, "simulator input");
  if (system_ == SystemKind::kSinusoid) {
    const auto p = SinusoidParams::from(params);
    Vector out(1);
    out(0) = fidelity_ == Fidelity::kLow ? sinusoid_function(p, x(0))
                                         : sinusoid_high_fidelity_function(p, x(0), damping_);
    return out;
  }
  const Vector state = x.head(state_dim());
  const Vector action = x.tail(action_dim());
  return integrate_step(*this, params, state, action, dt_);
}

Matrix SimulatorModel::evaluate_batch(const Matrix& X, const SimParams& params) const {
  if (X.cols() != input_dim()) throw ShapeError("simulator input matrix has wrong column count");
  Matrix out(X.rows(), output_dim());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    out.row(r) = evaluate(X.row(r).transpose(), params).transpose();
  }
  return out;
}

Vector integrate_step(const SimulatorModel& model, const SimParams& params, const Vector& state,
                      const Vector& action, double dt) {
  if (!model.is_dynamical()) throw InvalidInputError("integrate_step needs a dynamical system");
  if (state.size() != model.state_dim() || action.size() != model.action_dim()) {
    throw ShapeError("integrate_step: state/action dimension mismatch");
  }
  const DerivativeField field = [&](const Vector& s, const Vector& a) {
    return model.derivative(s, a, params);
  };
  return rk4_step(field, state, action, dt);
}

Vector integrate_step(const SimulatorModel& model, const Vector& state, const Vector& action,
                      double dt) {
  return integrate_step(model, model.fixed_params(), state, action, dt);
}

}  // namespace simpel
