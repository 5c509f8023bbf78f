#include "simpel/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace simpel {

Matrix TaskConfig::skip_matrix() const {
  if (!state_skip) return {};
  Matrix skip = Matrix::Zero(output_dim(), input_dim());
  skip.leftCols(output_dim()).setIdentity();
  return skip;
}

Normalizer TaskConfig::normalizer() const {
  return {domain.lower, domain.upper, output_center, output_scale, skip_matrix()};
}

void TaskConfig::validate() const {
  domain.validate();
  if (domain.input_dim() != input_dim()) throw ConfigError("task domain does not match the simulator input");
  if (train_lower.has_value() != train_upper.has_value()) {
    throw ConfigError("training box needs both lower and upper bounds");
  }
  if (train_lower && (train_lower->size() != input_dim() || train_upper->size() != input_dim() ||
                      (train_lower->array() > train_upper->array()).any())) {
    throw ConfigError("training box must match the input dimension with lower <= upper");
  }
  if (noise_std.size() != output_dim() || (noise_std.array() <= 0.0).any()) {
    throw ConfigError("noise std must be positive, one value per output");
  }
  if (output_center.size() != output_dim() || output_scale.size() != output_dim()) {
    throw ConfigError("output center/scale must have one value per output");
  }
  if (state_skip && !low_fidelity.is_dynamical()) throw ConfigError("state skip needs a dynamical system");
  if (test_size < 1) throw ConfigError("test size must be >= 1");
  for (const auto& g : gap) g.validate();
  for (const auto& g : generic) g.validate();
  if (generic.empty()) throw ConfigError("the generic GP prior needs a kernel");
  (void)truth.fixed_params();
  if (truth.system() != low_fidelity.system()) throw ConfigError("truth and simulator systems differ");
}

TaskConfig default_task(SystemKind system) {
  TaskConfig t;
  t.system = system;
  const ParamPrior prior = default_param_prior(system);
  t.low_fidelity = SimulatorModel(system, Fidelity::kLow, prior);
  t.truth = SimulatorModel(system, Fidelity::kHigh, prior).with_params(default_true_params(system));
  switch (system) {
    case SystemKind::kSinusoid:
      t.domain = {Vector::Constant(1, -5.0), Vector::Constant(1, 5.0), 16};
      t.noise_std = Vector::Constant(1, 0.1);
      t.gap = {{0.09, 2.0, Correlation::kSquaredExponential, std::nullopt}};
      t.generic = {{2.0, 1.0, Correlation::kSquaredExponential, std::nullopt}};
      t.output_center = Vector::Zero(1);
      t.output_scale = Vector::Constant(1, 2.0);
      break;
    case SystemKind::kPendulum: {
      t.domain = {Eigen::Vector3d(-std::numbers::pi, -6.0, -1.0),
                  Eigen::Vector3d(std::numbers::pi, 6.0, 1.0), 16};
      t.noise_std = Vector::Constant(2, 0.01);
      t.gap = {{4e-6, 4.0, Correlation::kSquaredExponential, std::nullopt},
               {2.5e-3, 4.0, Correlation::kSquaredExponential, std::nullopt}};
      t.generic = {{0.04, 2.0, Correlation::kSquaredExponential, std::nullopt},
                   {0.5, 2.0, Correlation::kSquaredExponential, std::nullopt}};
      t.output_center = Vector::Zero(2);
      t.output_scale = Eigen::Vector2d(0.3, 1.0);
      t.state_skip = true;
      break;
    }
    case SystemKind::kBicycle: {
      Vector lo(6), hi(6);
      lo << -3.0, -3.0, -std::numbers::pi, -2.0, -kMaxSteering, -1.0;
      hi << 3.0, 3.0, std::numbers::pi, 2.0, kMaxSteering, 1.0;
      t.domain = {lo, hi, 16};
      t.noise_std = Vector::Constant(4, 0.01);
      t.gap = {{1e-4, 4.0, Correlation::kSquaredExponential, std::nullopt}};
      t.generic = {{0.02, 2.0, Correlation::kSquaredExponential, std::nullopt}};
      t.output_center = Vector::Zero(4);
      t.output_scale = Vector::Constant(4, 0.1);
      t.state_skip = true;
      break;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------

std::string to_string(Method method) {
  switch (method) {
    case Method::kSimpel: return "simpel";
    case Method::kSimpelOnlySim: return "simpel-only-sim";
    case Method::kFsvgd: return "fsvgd";
    case Method::kSvgd: return "svgd";
    case Method::kGreyBox: return "greybox";
    case Method::kSysId: return "sysid";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> kAll{Method::kSimpel, Method::kSimpelOnlySim, Method::kFsvgd,
                                        Method::kSvgd,   Method::kGreyBox,       Method::kSysId};
  return kAll;
}

void MethodConfig::validate() const {
  if (hidden.empty()) throw ConfigError("the network needs at least one hidden layer");
  for (int w : hidden) {
    if (w < 1) throw ConfigError("hidden layer widths must be >= 1");
  }
  if (num_particles < 1) throw ConfigError("need at least one particle");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("holdout fraction must lie in (0, 1)");
  }
  svgd.validate();
  sysid.validate();
  fsvgd.optimizer.validate();
  fsvgd.estimator.validate();
  if (fsvgd.iterations < 0) throw ConfigError("iteration count must be nonnegative");
  if (fsvgd.num_prior_samples < 2) throw ConfigError("need at least two prior samples per step");
  if (fsvgd.measurement.size < 0) throw ConfigError("measurement set size must be nonnegative");
}

MlpArchitecture task_architecture(const TaskConfig& task, const MethodConfig& config) {
  return {task.input_dim(), task.output_dim(), config.hidden, config.activation};
}

std::unique_ptr<FunctionPrior> simulation_prior(const TaskConfig& task, bool with_gap) {
  return std::make_unique<SimulatorGpPrior>(task.low_fidelity,
                                            with_gap ? task.gap : std::vector<GapKernelConfig>{});
}

std::unique_ptr<FunctionPrior> generic_prior(const TaskConfig& task) {
  return std::make_unique<GpPrior>(task.input_dim(), task.output_center, task.generic,
                                   task.skip_matrix());
}

namespace {

FsvgdConfig task_fsvgd(const TaskConfig& task, const MethodConfig& config) {
  FsvgdConfig f = config.fsvgd;
  f.measurement.lower = task.domain.lower;
  f.measurement.upper = task.domain.upper;
  return f;
}

std::unique_ptr<FunctionPrior> prior_for(Method method, const TaskConfig& task) {
  switch (method) {
    case Method::kSimpel: return simulation_prior(task, true);
    case Method::kSimpelOnlySim: return simulation_prior(task, false);
    case Method::kFsvgd: return generic_prior(task);
    default: break;
  }
  throw ConfigError("method '" + to_string(method) + "' has no functional prior");
}

}  // namespace

Vector heldout_noise_mle(const FittedModel& model, const Dataset& holdout) {
  holdout.validate();
  if (holdout.empty()) throw InvalidInputError("noise estimation needs held-out rows");
  const Prediction p = model.predict(holdout.X);
  constexpr double kFloor = 1e-12;
  Vector out(holdout.y.cols());
  for (Eigen::Index o = 0; o < holdout.y.cols(); ++o) {
    const Vector r2 = (holdout.y.col(o) - p.mean.col(o)).array().square();
    const Vector v = p.epistemic_variance.col(o);
    // d/ds of the log-likelihood; its sign change brackets the maximizer.
    const auto slope = [&](double s) {
      return ((r2.array() - (v.array() + s)) / (v.array() + s).square()).sum();
    };
    double lo = std::log(kFloor);
    double hi = std::log(r2.maxCoeff() + v.maxCoeff() + kFloor) + 1.0;
    if (slope(kFloor) <= 0.0) {
      out(o) = kFloor;
      continue;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slope(std::exp(mid)) > 0.0 ? lo : hi) = mid;
    }
    out(o) = std::exp(0.5 * (lo + hi));
  }
  require_finite(out, "held-out noise variance");
  return out;
}

namespace {

std::unique_ptr<FittedModel> fit_with_noise(Method method, const TaskConfig& task,
                                            const Dataset& train, const MethodConfig& config,
                                            std::uint64_t seed, const Vector& noise) {
  const MlpArchitecture arch = task_architecture(task, config);
  switch (method) {
    case Method::kSimpel:
    case Method::kSimpelOnlySim:
    case Method::kFsvgd: {
      auto ensemble = std::make_unique<ParticleEnsemble>(ParticleEnsemble::initialize(
          arch, task.normalizer(), noise, config.num_particles, derive_seed(seed, 0)));
      const auto prior = prior_for(method, task);
      train_fsvgd(*ensemble, train, *prior, task_fsvgd(task, config), derive_seed(seed, 1));
      return ensemble;
    }
    case Method::kSvgd: {
      auto ensemble = std::make_unique<ParticleEnsemble>(ParticleEnsemble::initialize(
          arch, task.normalizer(), noise, config.num_particles, derive_seed(seed, 0)));
      train_svgd(*ensemble, train, config.svgd, derive_seed(seed, 1));
      return ensemble;
    }
    case Method::kSysId:
      return std::make_unique<SysIdModel>(sysid_fit(train, task.low_fidelity,
                                                    task.low_fidelity.prior(), noise, config.sysid,
                                                    derive_seed(seed, 2)));
    case Method::kGreyBox: {
      Normalizer residual_norm{task.domain.lower, task.domain.upper, Vector::Zero(task.output_dim()),
                               task.output_scale, Matrix()};
      ParticleEnsemble residual = ParticleEnsemble::initialize(arch, residual_norm, noise,
                                                               config.num_particles,
                                                               derive_seed(seed, 0));
      const GpPrior residual_prior(task.input_dim(), Vector::Zero(task.output_dim()), task.generic);
      return std::make_unique<GreyBoxModel>(greybox_fit(train, task.low_fidelity,
                                                        task.low_fidelity.prior(), config.sysid,
                                                        std::move(residual), residual_prior,
                                                        task_fsvgd(task, config),
                                                        derive_seed(seed, 3)));
    }
  }
  throw ConfigError("unknown method");
}

}  // namespace

std::unique_ptr<FittedModel> fit_method(Method method, const TaskConfig& task,
                                        const Dataset& train, const MethodConfig& config,
                                        std::uint64_t seed) {
  config.validate();
  if (!config.learn_noise || train.size() < 2) {
    return fit_with_noise(method, task, train, config, seed, task.noise_variance());
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 4));
  std::shuffle(order.begin(), order.end(), rng);
  const auto held = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(std::lround(config.holdout_fraction * static_cast<double>(train.size()))), 1,
      train.size() - 1);
  const std::vector<Eigen::Index> holdout_rows(order.begin(), order.begin() + held);
  const std::vector<Eigen::Index> fit_rows(order.begin() + held, order.end());
  const auto pilot = fit_with_noise(method, task, train.rows(fit_rows), config, derive_seed(seed, 5),
                                    task.noise_variance());
  const Vector noise = heldout_noise_mle(*pilot, train.rows(holdout_rows));
  return fit_with_noise(method, task, train, config, seed, noise);
}

void continue_training(ParticleEnsemble& ensemble, Method method, const TaskConfig& task,
                       const Dataset& train, const MethodConfig& config, int iterations,
                       std::uint64_t seed) {
  FsvgdConfig f = task_fsvgd(task, config);
  f.iterations = iterations;
  const auto prior = prior_for(method, task);
  train_fsvgd(ensemble, train, *prior, f, seed);
}

}  // namespace simpel
