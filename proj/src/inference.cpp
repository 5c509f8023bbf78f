#include "simpel/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

namespace simpel {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adam" || name == "rms") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and nonnegative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(final_lr_ratio > 0.0 && final_lr_ratio <= 1.0)) {
    throw ConfigError("final learning-rate ratio must lie in (0, 1]");
  }
}

Optimizer::Optimizer(OptimizerConfig config, int horizon)
    : config_(config), horizon_(std::max(horizon, 1)) {
  config_.validate();
}

double Optimizer::step(std::vector<Vector>& params, const std::vector<Vector>& directions) {
  if (params.size() != directions.size()) throw ShapeError("one direction per particle required");
  if (first_.size() != params.size()) {
    first_.assign(params.size(), Vector());
    second_.assign(params.size(), Vector());
    for (std::size_t l = 0; l < params.size(); ++l) {
      first_[l] = Vector::Zero(params[l].size());
      second_[l] = Vector::Zero(params[l].size());
    }
  }
  const double progress = std::min(1.0, static_cast<double>(t_) / horizon_);
  const double lr = config_.learning_rate * std::pow(config_.final_lr_ratio, progress);
  ++t_;
  double norm_sum = 0.0;
  for (std::size_t l = 0; l < params.size(); ++l) {
    const Vector& g = directions[l];
    Vector update;
    switch (config_.kind) {
      case OptimizerKind::kSgd:
        update = lr * g;
        break;
      case OptimizerKind::kMomentum:
        first_[l] = config_.momentum * first_[l] + g;
        update = lr * first_[l];
        break;
      case OptimizerKind::kAdam: {
        first_[l] = config_.beta1 * first_[l] + (1.0 - config_.beta1) * g;
        second_[l] = config_.beta2 * second_[l] + (1.0 - config_.beta2) * g.cwiseAbs2();
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        update = lr * (first_[l] / c1).array() / ((second_[l] / c2).array().sqrt() + config_.epsilon);
        break;
      }
    }
    params[l] += update;
    norm_sum += update.norm();
  }
  return params.empty() ? 0.0 : norm_sum / static_cast<double>(params.size());
}

// ---------------------------------------------------------------------------

double svgd_bandwidth(const Matrix& points) {
  if (points.rows() < 2) return 1.0;
  const double med = median_pairwise_sq_distance(points);
  const double h = med / std::log(static_cast<double>(points.rows()));
  return h > 0.0 && std::isfinite(h) ? h : 1.0;
}

Matrix svgd_phi(const Matrix& points, const Matrix& scores, double bandwidth) {
  if (points.rows() != scores.rows() || points.cols() != scores.cols()) {
    throw ShapeError("SVGD points and scores differ in shape");
  }
  if (!(bandwidth > 0.0)) throw InvalidInputError("SVGD kernel bandwidth must be positive");
  const Eigen::Index L = points.rows();
  const Vector sq = points.rowwise().squaredNorm();
  Matrix d2 = -2.0 * points * points.transpose();
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();
  const Matrix K = (-d2.array().max(0.0) / bandwidth).exp().matrix();
  const Vector ksum = K.rowwise().sum();
  // sum_l grad_{x_l} K_li = (2/h) sum_l K_li (x_i - x_l).
  const Matrix repulsion = (2.0 / bandwidth) * (ksum.asDiagonal() * points - K * points);
  return (K * scores + repulsion) / static_cast<double>(L);
}

// ---------------------------------------------------------------------------

void FsvgdConfig::validate() const {
  optimizer.validate();
  if (iterations < 0) throw ConfigError("iteration count must be nonnegative");
  measurement.validate();
  if (kernel_bandwidth && !(*kernel_bandwidth > 0.0)) {
    throw ConfigError("SVGD kernel bandwidth must be positive");
  }
  estimator.validate();
  if (num_prior_samples < 2) throw ConfigError("need at least two prior samples per step");
  if (data_batch_size && *data_batch_size < 1) throw ConfigError("data batch size must be >= 1");
}

void SvgdConfig::validate() const {
  optimizer.validate();
  if (iterations < 0) throw ConfigError("iteration count must be nonnegative");
  if (!(prior_variance > 0.0)) throw ConfigError("weight prior variance must be positive");
  if (kernel_bandwidth && !(*kernel_bandwidth > 0.0)) {
    throw ConfigError("SVGD kernel bandwidth must be positive");
  }
  if (data_batch_size && *data_batch_size < 1) throw ConfigError("data batch size must be >= 1");
}

double gaussian_nll(const Matrix& mean, const Matrix& variance, const Matrix& y) {
  if (mean.rows() != y.rows() || mean.cols() != y.cols() || variance.rows() != y.rows() ||
      variance.cols() != y.cols()) {
    throw ShapeError("NLL inputs differ in shape");
  }
  if (y.size() == 0) return 0.0;
  if ((variance.array() <= 0.0).any()) throw InvalidInputError("predictive variance must be positive");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const auto terms =
      0.5 * (log2pi + variance.array().log() + (y - mean).array().square() / variance.array());
  return terms.sum() / static_cast<double>(y.size());
}

namespace {

// Minibatch of rows and the likelihood weight m / b that keeps the data term
// unbiased.
Dataset draw_batch(const Dataset& data, std::optional<int> batch_size, Rng& rng, double* weight) {
  *weight = 1.0;
  if (!batch_size || data.size() <= *batch_size) return data;
  std::vector<Eigen::Index> index(static_cast<std::size_t>(data.size()));
  std::iota(index.begin(), index.end(), 0);
  const auto b = static_cast<std::size_t>(*batch_size);
  for (std::size_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, index.size() - 1);
    std::swap(index[i], index[pick(rng)]);
  }
  index.resize(b);
  *weight = static_cast<double>(data.size()) / static_cast<double>(b);
  return data.rows(index);
}

Matrix stack_rows(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

double train_nll_of(const std::vector<Matrix>& values, Eigen::Index data_rows, const Matrix& y,
                    const Vector& noise) {
  if (data_rows == 0) return 0.0;
  const auto L = static_cast<double>(values.size());
  Matrix mean = Matrix::Zero(data_rows, y.cols());
  for (const auto& v : values) mean += v.topRows(data_rows);
  mean /= L;
  Matrix var = Matrix::Zero(data_rows, y.cols());
  if (values.size() > 1) {
    for (const auto& v : values) var += (v.topRows(data_rows) - mean).array().square().matrix();
    var /= (L - 1.0);
  }
  var.rowwise() += noise.transpose();
  return gaussian_nll(mean, var, y);
}

void check_finite_update(const std::vector<Vector>& params, int iteration) {
  for (const auto& p : params) {
    if (!p.allFinite()) {
      throw DivergenceError("training diverged (non-finite parameters) at iteration " +
                            std::to_string(iteration));
    }
  }
}

}  // namespace

StepResult fsvgd_direction(const ParticleEnsemble& ensemble, const Dataset& batch,
                           const Matrix& measurement, const PriorScoreFn& prior_score,
                           double likelihood_weight, std::optional<double> kernel_bandwidth) {
  batch.validate();
  const int L = ensemble.num_particles();
  const int dy = ensemble.output_dim();
  if (batch.size() > 0 && (batch.X.cols() != ensemble.input_dim() || batch.y.cols() != dy)) {
    throw ShapeError("dataset does not match the ensemble dimensions");
  }
  if (measurement.rows() > 0 && measurement.cols() != ensemble.input_dim()) {
    throw ShapeError("measurement set does not match the ensemble input dimension");
  }
  const Matrix X = stack_rows(batch.X, measurement);
  const Eigen::Index rows = X.rows();
  if (rows == 0) throw InvalidInputError("functional update needs data or measurement points");
  const Eigen::Index b = batch.size();

  std::vector<Matrix> values;
  values.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) values.push_back(ensemble.particle_mean(l, X));

  std::vector<Matrix> query(static_cast<std::size_t>(dy), Matrix(L, rows));
  for (int l = 0; l < L; ++l) {
    for (int o = 0; o < dy; ++o) query[static_cast<std::size_t>(o)].row(l) = values[static_cast<std::size_t>(l)].col(o).transpose();
  }
  const std::vector<Matrix> prior = prior_score(query);
  if (prior.size() != static_cast<std::size_t>(dy)) throw ShapeError("prior score has the wrong output count");

  // Flatten output-major: entry o * rows + r.
  const Eigen::Index D = rows * dy;
  Matrix F(L, D);
  Matrix S(L, D);
  for (int l = 0; l < L; ++l) {
    const Matrix& h = values[static_cast<std::size_t>(l)];
    Matrix s = Matrix::Zero(rows, dy);
    if (b > 0) {
      s.topRows(b) = likelihood_weight * likelihood_score(h.topRows(b), batch.y, ensemble.noise_variance());
    }
    for (int o = 0; o < dy; ++o) {
      const Matrix& p = prior[static_cast<std::size_t>(o)];
      if (p.rows() != L || p.cols() != rows) throw ShapeError("prior score has the wrong shape");
      s.col(o) += p.row(l).transpose();
    }
    F.row(l) = Eigen::Map<const Vector>(h.data(), D).transpose();
    S.row(l) = Eigen::Map<const Vector>(s.data(), D).transpose();
  }
  require_finite(S, "posterior score");

  const double h = kernel_bandwidth.value_or(svgd_bandwidth(F));
  const Matrix phi = svgd_phi(F, S, h);

  StepResult out;
  out.directions.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const Vector row = phi.row(l).transpose();
    const Matrix upstream = Eigen::Map<const Matrix>(row.data(), rows, dy);
    out.directions.push_back(ensemble.particle_vjp(l, X, upstream));
  }
  out.train_nll = train_nll_of(values, b, batch.y, ensemble.noise_variance());
  return out;
}

TrainingLogRow fsvgd_step(ParticleEnsemble& ensemble, const Dataset& data,
                          const FunctionPrior& prior, const FsvgdConfig& config,
                          Optimizer& optimizer, Rng& rng, int iteration) {
  double weight = 1.0;
  const Dataset batch = draw_batch(data, config.data_batch_size, rng, &weight);
  const Matrix measurement = sample_measurement_set(config.measurement, rng);
  const Matrix X = stack_rows(batch.X, measurement);
  const PriorSampleMatrix samples = prior.sample(X, config.num_prior_samples, rng);
  const PriorScoreFn score = [&](const std::vector<Matrix>& query) {
    return estimate_score(config.estimator, samples, query);
  };
  const StepResult step =
      fsvgd_direction(ensemble, batch, measurement, score, weight, config.kernel_bandwidth);
  const double norm = optimizer.step(ensemble.particles(), step.directions);
  check_finite_update(ensemble.particles(), iteration);
  return {iteration, step.train_nll, norm};
}

std::vector<TrainingLogRow> train_fsvgd(ParticleEnsemble& ensemble, const Dataset& data,
                                        const FunctionPrior& prior, const FsvgdConfig& config,
                                        std::uint64_t seed) {
  config.validate();
  if (prior.input_dim() != ensemble.input_dim() || prior.output_dim() != ensemble.output_dim()) {
    throw ShapeError("prior and ensemble dimensions differ");
  }
  Optimizer optimizer(config.optimizer, config.iterations);
  Rng rng(seed);
  std::vector<TrainingLogRow> log;
  log.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    log.push_back(fsvgd_step(ensemble, data, prior, config, optimizer, rng, it));
  }
  return log;
}

// ---------------------------------------------------------------------------

StepResult svgd_direction(const ParticleEnsemble& ensemble, const Dataset& batch,
                          double prior_variance, double likelihood_weight,
                          std::optional<double> kernel_bandwidth) {
  batch.validate();
  if (!(prior_variance > 0.0)) throw InvalidInputError("weight prior variance must be positive");
  const int L = ensemble.num_particles();
  const Eigen::Index P = ensemble.mlp().num_params();
  Matrix theta(L, P);
  Matrix S(L, P);
  std::vector<Matrix> values(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const Vector& t = ensemble.particles()[static_cast<std::size_t>(l)];
    Vector s = -t / prior_variance;
    if (batch.size() > 0) {
      Matrix h = ensemble.particle_mean(l, batch.X);
      const Matrix g = likelihood_weight * likelihood_score(h, batch.y, ensemble.noise_variance());
      s += ensemble.particle_vjp(l, batch.X, g);
      values[static_cast<std::size_t>(l)] = std::move(h);
    }
    theta.row(l) = t.transpose();
    S.row(l) = s.transpose();
  }
  require_finite(S, "posterior score");
  const double h = kernel_bandwidth.value_or(svgd_bandwidth(theta));
  const Matrix phi = svgd_phi(theta, S, h);
  StepResult out;
  for (int l = 0; l < L; ++l) out.directions.push_back(phi.row(l).transpose());
  if (batch.size() > 0) out.train_nll = train_nll_of(values, batch.size(), batch.y, ensemble.noise_variance());
  return out;
}

TrainingLogRow svgd_step(ParticleEnsemble& ensemble, const Dataset& data, const SvgdConfig& config,
                         Optimizer& optimizer, Rng& rng, int iteration) {
  double weight = 1.0;
  const Dataset batch = draw_batch(data, config.data_batch_size, rng, &weight);
  const StepResult step =
      svgd_direction(ensemble, batch, config.prior_variance, weight, config.kernel_bandwidth);
  const double norm = optimizer.step(ensemble.particles(), step.directions);
  check_finite_update(ensemble.particles(), iteration);
  return {iteration, step.train_nll, norm};
}

std::vector<TrainingLogRow> train_svgd(ParticleEnsemble& ensemble, const Dataset& data,
                                       const SvgdConfig& config, std::uint64_t seed) {
  config.validate();
  Optimizer optimizer(config.optimizer, config.iterations);
  Rng rng(seed);
  std::vector<TrainingLogRow> log;
  for (int it = 0; it < config.iterations; ++it) {
    log.push_back(svgd_step(ensemble, data, config, optimizer, rng, it));
  }
  return log;
}

// ---------------------------------------------------------------------------

Vector point_fit(const Dataset& data, const MlpArchitecture& arch, const Normalizer& normalizer,
                 const Vector& noise_variance, const PointFitConfig& config, const Vector& init) {
  config.optimizer.validate();
  data.validate();
  if (config.iterations < 0) throw ConfigError("iteration budget must be nonnegative");
  if (config.prior_variance && !(*config.prior_variance > 0.0)) {
    throw ConfigError("weight prior variance must be positive");
  }
  if (data.empty() && !config.prior_variance) {
    throw InvalidInputError("maximum-likelihood fit needs a nonempty dataset");
  }
  ParticleEnsemble model(arch, normalizer, noise_variance, {init});
  Optimizer optimizer(config.optimizer, config.iterations);

  auto objective_and_grad = [&](Vector* grad) {
    double obj = 0.0;
    Vector g = Vector::Zero(init.size());
    const Vector& theta = model.particles()[0];
    if (!data.empty()) {
      const Matrix h = model.particle_mean(0, data.X);
      const Matrix s = likelihood_score(h, data.y, noise_variance);
      obj -= 0.5 * ((data.y - h).array().square().rowwise() / noise_variance.transpose().array()).sum();
      if (grad != nullptr) g += model.particle_vjp(0, data.X, s);
    }
    if (config.prior_variance) {
      obj -= 0.5 * theta.squaredNorm() / *config.prior_variance;
      if (grad != nullptr) g -= theta / *config.prior_variance;
    }
    if (grad != nullptr) *grad = std::move(g);
    return obj;
  };

  Vector best = init;
  double best_obj = objective_and_grad(nullptr);
  for (int it = 0; it < config.iterations; ++it) {
    Vector g;
    objective_and_grad(&g);
    optimizer.step(model.particles(), {g});
    check_finite_update(model.particles(), it);
    const double obj = objective_and_grad(nullptr);
    if (obj > best_obj) {
      best_obj = obj;
      best = model.particles()[0];
    }
  }
  return best;
}

Vector mle_fit(const Dataset& data, const MlpArchitecture& arch, const Normalizer& normalizer,
               const Vector& noise_variance, const OptimizerConfig& optimizer, int iterations,
               const Vector& init) {
  return point_fit(data, arch, normalizer, noise_variance, {optimizer, iterations, std::nullopt},
                   init);
}

Vector map_fit(const Dataset& data, const MlpArchitecture& arch, const Normalizer& normalizer,
               const Vector& noise_variance, double prior_variance,
               const OptimizerConfig& optimizer, int iterations, const Vector& init) {
  return point_fit(data, arch, normalizer, noise_variance, {optimizer, iterations, prior_variance},
                   init);
}

void write_training_log(const std::string& path, const std::vector<TrainingLogRow>& rows) {
  std::ofstream os(path);
  if (!os) throw InvalidInputError("cannot open '" + path + "' for writing");
  os << "iteration,train_nll,update_norm\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << format_double(r.train_nll) << ',' << format_double(r.update_norm)
       << '\n';
  }
}

}  // namespace simpel
