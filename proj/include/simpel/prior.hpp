#pragma once

#include <optional>
#include <string>
#include <vector>

#include "simpel/common.hpp"
#include "simpel/simulators.hpp"

namespace simpel {

/// Uniform box over the input domain plus the number k of points to draw.
struct MeasurementDistribution {
  Vector lower;
  Vector upper;
  int size = 16;

  int input_dim() const { return static_cast<int>(lower.size()); }
  void validate() const;
};

Matrix sample_measurement_set(const MeasurementDistribution& zeta, Rng& rng);

enum class Correlation { kSquaredExponential, kMatern52 };

std::string to_string(Correlation c);
Correlation parse_correlation(std::string_view name);

/// Isotropic stationary kernel k(x, x') = variance * rho(|x - x'| / lengthscale).
struct GapKernelConfig {
  double variance = 1.0;
  double lengthscale = 1.0;
  Correlation correlation = Correlation::kSquaredExponential;
  std::optional<double> jitter;  // defaults to 1e-6 * variance

  double effective_jitter() const { return jitter.value_or(1e-6 * variance); }
  void validate() const;
};

double correlation(Correlation c, double scaled_distance);

/// K_ab = variance * rho(|x_a - x_b| / l) + jitter * [a == b].
Matrix gap_kernel_matrix(const Matrix& X, const GapKernelConfig& config);

/// n i.i.d. zero-mean draws with covariance K (one per row), via Cholesky.
Matrix sample_gap_functions(const Matrix& K, int n, Rng& rng);

/// Prior function values at a measurement set: one N x k matrix per output
/// dimension, row j holding the j-th sampled function evaluated at X.
struct PriorSampleMatrix {
  std::vector<Matrix> outputs;
  Matrix X;

  int num_samples() const { return outputs.empty() ? 0 : static_cast<int>(outputs[0].rows()); }
  int num_points() const { return outputs.empty() ? 0 : static_cast<int>(outputs[0].cols()); }
  int output_dim() const { return static_cast<int>(outputs.size()); }
  void validate() const;
};

/// Source of prior function samples over arbitrary measurement sets.
class FunctionPrior {
 public:
  virtual ~FunctionPrior() = default;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual PriorSampleMatrix sample(const Matrix& X, int num_samples, Rng& rng) const = 0;
};

/// Per-output gap kernels: either one config shared by all outputs or one
/// per output dimension.
const GapKernelConfig& gap_for_output(const std::vector<GapKernelConfig>& gaps, int output);

/// Simulator with random parameters plus an independent GP per output.
/// Passing no gap kernels gives the simulator-only process.
PriorSampleMatrix sample_prior_matrix(const Matrix& X, const SimulatorModel& sim,
                                      const ParamPrior& prior,
                                      const std::vector<GapKernelConfig>& gaps, int num_samples,
                                      Rng& rng);

class SimulatorGpPrior final : public FunctionPrior {
 public:
  SimulatorGpPrior(SimulatorModel sim, std::vector<GapKernelConfig> gaps);

  int input_dim() const override { return sim_.input_dim(); }
  int output_dim() const override { return sim_.output_dim(); }
  PriorSampleMatrix sample(const Matrix& X, int num_samples, Rng& rng) const override;

  const SimulatorModel& simulator() const { return sim_; }
  const std::vector<GapKernelConfig>& gaps() const { return gaps_; }

 private:
  SimulatorModel sim_;
  std::vector<GapKernelConfig> gaps_;
};

/// Independent GPs per output with the affine mean mean + skip * x (skip is
/// d_y x d_x, or empty for a constant mean).
class GpPrior final : public FunctionPrior {
 public:
  GpPrior(int input_dim, Vector mean, std::vector<GapKernelConfig> kernels, Matrix skip = {});

  int input_dim() const override { return input_dim_; }
  int output_dim() const override { return static_cast<int>(mean_.size()); }
  PriorSampleMatrix sample(const Matrix& X, int num_samples, Rng& rng) const override;

  const Vector& mean() const { return mean_; }
  const std::vector<GapKernelConfig>& kernels() const { return kernels_; }
  const Matrix& skip() const { return skip_; }

 private:
  int input_dim_;
  Vector mean_;
  Matrix skip_;
  std::vector<GapKernelConfig> kernels_;
};

/// Binary layout (little-endian host order):
///   char[8] "SPPRIOR1", uint64 N, uint64 k, uint64 d_y, uint64 d_x,
///   d_y blocks of N*k float64 (row-major), then k*d_x float64 for X.
void write_prior_samples(const std::string& path, const PriorSampleMatrix& samples);
PriorSampleMatrix read_prior_samples(const std::string& path);

}  // namespace simpel
