#pragma once

#include <vector>

#include "simpel/ensemble.hpp"
#include "simpel/inference.hpp"
#include "simpel/prior.hpp"
#include "simpel/simulators.hpp"

namespace simpel {

struct SysIdConfig {
  int num_starts = 8;
  int max_iterations = 600;     // Nelder-Mead iterations per start
  double tolerance = 1e-8;      // simplex size at which a start stops

  void validate() const;
};

/// Low-fidelity simulator with fitted parameters phi*. Acts as a single
/// deterministic particle with the observation noise as predictive variance.
class SysIdModel final : public FittedModel {
 public:
  SysIdModel(SimulatorModel fitted, Vector noise_variance, std::vector<double> trace);

  int input_dim() const override { return sim_.input_dim(); }
  int output_dim() const override { return sim_.output_dim(); }
  int num_particles() const override { return 1; }
  Matrix particle_mean(int particle, const Matrix& X) const override;
  Vector noise_variance() const override { return noise_variance_; }

  const SimulatorModel& simulator() const { return sim_; }
  const SimParams& params() const { return sim_.fixed_params(); }
  /// Best-so-far log-likelihood after each objective evaluation.
  const std::vector<double>& trace() const { return trace_; }

 private:
  SimulatorModel sim_;
  Vector noise_variance_;
  std::vector<double> trace_;
};

/// Gaussian log-likelihood of the data under g(., phi) (up to a constant);
/// -inf when the simulator diverges.
double sysid_log_likelihood(const Dataset& data, const SimulatorModel& sim, const SimParams& params,
                            const Vector& noise_variance);

/// Multi-start bounded Nelder-Mead over phi. Bounds are enforced by the map
/// phi = mid + half_width * tanh(z); degenerate bounds are held fixed.
SysIdModel sysid_fit(const Dataset& data, const SimulatorModel& sim, const ParamPrior& prior,
                     const Vector& noise_variance, const SysIdConfig& config, std::uint64_t seed);

/// Simulator fit plus a particle ensemble on the residuals y - g(x, phi*).
class GreyBoxModel final : public FittedModel {
 public:
  GreyBoxModel(SysIdModel sysid, ParticleEnsemble residual);

  int input_dim() const override { return sysid_.input_dim(); }
  int output_dim() const override { return sysid_.output_dim(); }
  int num_particles() const override { return residual_.num_particles(); }
  Matrix particle_mean(int particle, const Matrix& X) const override;
  Vector noise_variance() const override { return residual_.noise_variance(); }

  const SysIdModel& sysid() const { return sysid_; }
  const ParticleEnsemble& residual() const { return residual_; }

 private:
  SysIdModel sysid_;
  ParticleEnsemble residual_;
};

/// Runs sysid_fit, then trains `residual` with functional SVGD under
/// `residual_prior` on the targets y - g(X, phi*).
GreyBoxModel greybox_fit(const Dataset& data, const SimulatorModel& sim, const ParamPrior& prior,
                         const SysIdConfig& sysid_config, ParticleEnsemble residual,
                         const FunctionPrior& residual_prior, const FsvgdConfig& fsvgd_config,
                         std::uint64_t seed);

}  // namespace simpel
