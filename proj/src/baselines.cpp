#include "simpel/baselines.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace simpel {

void SysIdConfig::validate() const {
  if (num_starts < 1) throw ConfigError("SysID needs at least one start");
  if (max_iterations < 0) throw ConfigError("SysID iteration budget must be nonnegative");
  if (!(tolerance > 0.0)) throw ConfigError("SysID tolerance must be positive");
}

SysIdModel::SysIdModel(SimulatorModel fitted, Vector noise_variance, std::vector<double> trace)
    : sim_(std::move(fitted)), noise_variance_(std::move(noise_variance)), trace_(std::move(trace)) {
  (void)sim_.fixed_params();
}

Matrix SysIdModel::particle_mean(int particle, const Matrix& X) const {
  if (particle != 0) throw InvalidInputError("SysID model has a single particle");
  return sim_.evaluate_batch(X, sim_.fixed_params());
}

double sysid_log_likelihood(const Dataset& data, const SimulatorModel& sim, const SimParams& params,
                            const Vector& noise_variance) {
  try {
    const Matrix g = sim.evaluate_batch(data.X, params);
    const Matrix r = data.y - g;
    const double v =
        -0.5 * (r.array().square().rowwise() / noise_variance.transpose().array()).sum();
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  } catch (const DivergenceError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

namespace {

struct SearchSpace {
  const ParamPrior* prior;
  std::vector<std::size_t> free;  // indices of parameters with lower < upper

  SimParams to_params(const gsl_vector* z) const {
    SimParams p = prior->midpoint();
    for (std::size_t i = 0; i < free.size(); ++i) {
      const ParamSpec& s = prior->specs()[free[i]];
      const double mid = 0.5 * (s.lower + s.upper);
      const double half = 0.5 * (s.upper - s.lower);
      p.values()(static_cast<Eigen::Index>(free[i])) = mid + half * std::tanh(gsl_vector_get(z, i));
    }
    return p;
  }

  double to_latent(const ParamSpec& s, double value) const {
    const double mid = 0.5 * (s.lower + s.upper);
    const double half = 0.5 * (s.upper - s.lower);
    return std::atanh(std::clamp((value - mid) / half, -0.995, 0.995));
  }
};

struct Objective {
  const Dataset* data;
  const SimulatorModel* sim;
  const Vector* noise;
  const SearchSpace* space;
  std::vector<double>* trace;
  double best = -std::numeric_limits<double>::infinity();
  SimParams best_params;
};

double objective_fn(const gsl_vector* z, void* raw) {
  auto* obj = static_cast<Objective*>(raw);
  const SimParams p = obj->space->to_params(z);
  const double ll = sysid_log_likelihood(*obj->data, *obj->sim, p, *obj->noise);
  if (ll > obj->best) {
    obj->best = ll;
    obj->best_params = p;
  }
  obj->trace->push_back(obj->best);
  // Nelder-Mead needs finite values; divergence becomes a very poor score.
  return std::isfinite(ll) ? -ll : 1e100;
}

}  // namespace

SysIdModel sysid_fit(const Dataset& data, const SimulatorModel& sim, const ParamPrior& prior,
                     const Vector& noise_variance, const SysIdConfig& config, std::uint64_t seed) {
  config.validate();
  data.validate();
  if (data.empty()) throw InvalidInputError("system identification needs a nonempty dataset");
  if (data.X.cols() != sim.input_dim() || data.y.cols() != sim.output_dim()) {
    throw ShapeError("dataset does not match the simulator dimensions");
  }
  if (noise_variance.size() != sim.output_dim() || (noise_variance.array() <= 0.0).any()) {
    throw ConfigError("SysID needs a positive noise variance per output");
  }
  gsl_set_error_handler_off();

  SearchSpace space{&prior, {}};
  for (std::size_t i = 0; i < prior.specs().size(); ++i) {
    if (prior.specs()[i].upper > prior.specs()[i].lower) space.free.push_back(i);
  }
  std::vector<double> trace;
  Objective obj{&data, &sim, &noise_variance, &space, &trace, -std::numeric_limits<double>::infinity(), {}};

  if (space.free.empty()) {
    const SimParams p = prior.midpoint();
    const double ll = sysid_log_likelihood(data, sim, p, noise_variance);
    if (!std::isfinite(ll)) throw NumericalError("simulator diverges at the only admissible parameters");
    trace.push_back(ll);
    return SysIdModel(sim.with_params(p), noise_variance, std::move(trace));
  }

  const std::size_t n = space.free.size();
  using VecPtr = std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)>;
  using MinPtr = std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)>;
  gsl_multimin_function fn{&objective_fn, n, &obj};

  for (int start = 0; start < config.num_starts; ++start) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(start)));
    const SimParams init = prior.sample(rng);
    VecPtr x(gsl_vector_alloc(n), &gsl_vector_free);
    VecPtr step(gsl_vector_alloc(n), &gsl_vector_free);
    for (std::size_t i = 0; i < n; ++i) {
      const ParamSpec& s = prior.specs()[space.free[i]];
      gsl_vector_set(x.get(), i, space.to_latent(s, init.values()(static_cast<Eigen::Index>(space.free[i]))));
      gsl_vector_set(step.get(), i, 0.5);
    }
    MinPtr minimizer(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n),
                     &gsl_multimin_fminimizer_free);
    if (gsl_multimin_fminimizer_set(minimizer.get(), &fn, x.get(), step.get()) != GSL_SUCCESS) {
      continue;
    }
    for (int it = 0; it < config.max_iterations; ++it) {
      if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
      const double size = gsl_multimin_fminimizer_size(minimizer.get());
      if (gsl_multimin_test_size(size, config.tolerance) == GSL_SUCCESS) break;
    }
  }
  if (!std::isfinite(obj.best)) {
    throw NumericalError("system identification failed: the simulator diverged for every start");
  }
  return SysIdModel(sim.with_params(obj.best_params), noise_variance, std::move(trace));
}

// ---------------------------------------------------------------------------

GreyBoxModel::GreyBoxModel(SysIdModel sysid, ParticleEnsemble residual)
    : sysid_(std::move(sysid)), residual_(std::move(residual)) {
  if (residual_.input_dim() != sysid_.input_dim() || residual_.output_dim() != sysid_.output_dim()) {
    throw ShapeError("residual ensemble does not match the simulator dimensions");
  }
}

Matrix GreyBoxModel::particle_mean(int particle, const Matrix& X) const {
  return sysid_.particle_mean(0, X) + residual_.particle_mean(particle, X);
}

GreyBoxModel greybox_fit(const Dataset& data, const SimulatorModel& sim, const ParamPrior& prior,
                         const SysIdConfig& sysid_config, ParticleEnsemble residual,
                         const FunctionPrior& residual_prior, const FsvgdConfig& fsvgd_config,
                         std::uint64_t seed) {
  SysIdModel sysid = sysid_fit(data, sim, prior, residual.noise_variance(), sysid_config,
                               derive_seed(seed, 0));
  Dataset residual_data{data.X, data.y - sysid.particle_mean(0, data.X)};
  train_fsvgd(residual, residual_data, residual_prior, fsvgd_config, derive_seed(seed, 1));
  return GreyBoxModel(std::move(sysid), std::move(residual));
}

}  // namespace simpel
