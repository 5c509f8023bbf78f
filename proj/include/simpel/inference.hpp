#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "simpel/common.hpp"
#include "simpel/ensemble.hpp"
#include "simpel/prior.hpp"
#include "simpel/score.hpp"

namespace simpel {

enum class OptimizerKind { kSgd, kMomentum, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double final_lr_ratio = 1.0;   // learning rate decays geometrically to this fraction

  void validate() const;
};

/// Ascent optimizer with independent state per particle.
class Optimizer {
 public:
  /// `horizon` is the planned number of steps over which the learning rate
  /// decays; it is irrelevant when final_lr_ratio == 1.
  explicit Optimizer(OptimizerConfig config, int horizon = 1);

  /// theta_l += step(direction_l) for every particle; returns the mean norm
  /// of the applied updates.
  double step(std::vector<Vector>& params, const std::vector<Vector>& directions);
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<Vector> first_;
  std::vector<Vector> second_;
  long long t_ = 0;
  int horizon_ = 1;
};

/// Median heuristic for the SVGD kernel exp(-|a - b|^2 / h): h = med^2 / log L.
double svgd_bandwidth(const Matrix& points);

/// Stein variational direction for particles (rows of points) with scores
/// (rows of scores): phi_i = (1/L) sum_l [K_li s_l + grad_{x_l} K_li].
Matrix svgd_phi(const Matrix& points, const Matrix& scores, double bandwidth);

/// Prior score callback: receives, per output dimension, the L x rows matrix
/// of particle function values and returns the score in the same layout.
using PriorScoreFn = std::function<std::vector<Matrix>(const std::vector<Matrix>&)>;

struct FsvgdConfig {
  OptimizerConfig optimizer;                 // learning rate gamma lives here
  int iterations = 1000;
  MeasurementDistribution measurement;       // zeta and the number of extra points
  std::optional<double> kernel_bandwidth;    // fixed h; median heuristic otherwise
  EstimatorConfig estimator;
  int num_prior_samples = 64;
  std::optional<int> data_batch_size;        // minibatch of data rows per step

  void validate() const;
};

struct SvgdConfig {
  OptimizerConfig optimizer;
  int iterations = 1000;
  double prior_variance = 1.0;               // lambda^2 of the weight prior
  std::optional<double> kernel_bandwidth;
  std::optional<int> data_batch_size;

  void validate() const;
};

struct StepResult {
  std::vector<Vector> directions;            // ascent directions per particle
  double train_nll = 0.0;                    // on the data rows used this step
};

struct TrainingLogRow {
  int iteration = 0;
  double train_nll = 0.0;
  double update_norm = 0.0;
};

/// Functional update direction of one step on fixed data rows and a fixed
/// measurement set. The data rows come first in X = [batch.X; measurement];
/// likelihood scores on them are multiplied by likelihood_weight.
StepResult fsvgd_direction(const ParticleEnsemble& ensemble, const Dataset& batch,
                           const Matrix& measurement, const PriorScoreFn& prior_score,
                           double likelihood_weight = 1.0,
                           std::optional<double> kernel_bandwidth = std::nullopt);

/// One full step: subsample data, draw the measurement set, sample the prior
/// there, estimate its score and apply the projected update.
TrainingLogRow fsvgd_step(ParticleEnsemble& ensemble, const Dataset& data,
                          const FunctionPrior& prior, const FsvgdConfig& config,
                          Optimizer& optimizer, Rng& rng, int iteration = 0);

std::vector<TrainingLogRow> train_fsvgd(ParticleEnsemble& ensemble, const Dataset& data,
                                        const FunctionPrior& prior, const FsvgdConfig& config,
                                        std::uint64_t seed);

/// Weight-space SVGD direction under the prior N(0, prior_variance I).
StepResult svgd_direction(const ParticleEnsemble& ensemble, const Dataset& batch,
                          double prior_variance, double likelihood_weight = 1.0,
                          std::optional<double> kernel_bandwidth = std::nullopt);

TrainingLogRow svgd_step(ParticleEnsemble& ensemble, const Dataset& data, const SvgdConfig& config,
                         Optimizer& optimizer, Rng& rng, int iteration = 0);

std::vector<TrainingLogRow> train_svgd(ParticleEnsemble& ensemble, const Dataset& data,
                                       const SvgdConfig& config, std::uint64_t seed);

struct PointFitConfig {
  OptimizerConfig optimizer;
  int iterations = 2000;
  std::optional<double> prior_variance;      // set: MAP with N(0, lambda^2 I); unset: MLE
};

/// Gradient ascent on the log-likelihood (plus log-prior for MAP) from
/// `init`; returns the best iterate by objective value.
Vector point_fit(const Dataset& data, const MlpArchitecture& arch, const Normalizer& normalizer,
                 const Vector& noise_variance, const PointFitConfig& config, const Vector& init);

Vector mle_fit(const Dataset& data, const MlpArchitecture& arch, const Normalizer& normalizer,
               const Vector& noise_variance, const OptimizerConfig& optimizer, int iterations,
               const Vector& init);

Vector map_fit(const Dataset& data, const MlpArchitecture& arch, const Normalizer& normalizer,
               const Vector& noise_variance, double prior_variance,
               const OptimizerConfig& optimizer, int iterations, const Vector& init);

/// Mean Gaussian NLL per entry of targets y under N(mean, variance).
double gaussian_nll(const Matrix& mean, const Matrix& variance, const Matrix& y);

void write_training_log(const std::string& path, const std::vector<TrainingLogRow>& rows);

}  // namespace simpel
