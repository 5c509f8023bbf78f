#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simpel/baselines.hpp"
#include "simpel/ensemble.hpp"
#include "simpel/inference.hpp"
#include "simpel/prior.hpp"
#include "simpel/simulators.hpp"

namespace simpel {

/// A regression problem: the low-fidelity simulator with its parameter prior,
/// the high-fidelity ground truth, the input domain and the priors built
/// from them.
struct TaskConfig {
  SystemKind system = SystemKind::kSinusoid;
  SimulatorModel low_fidelity;           // carries p(phi)
  SimulatorModel truth;                  // high fidelity with fixed params
  MeasurementDistribution domain;        // zeta; also the test-set box
  std::optional<Vector> train_lower;     // training inputs box; domain if unset
  std::optional<Vector> train_upper;
  Vector noise_std;                      // per output
  std::vector<GapKernelConfig> gap;      // sim-to-real gap of the simulation prior
  std::vector<GapKernelConfig> generic;  // kernels of the data-driven GP prior
  Vector output_center;
  Vector output_scale;
  bool state_skip = false;               // models predict state + increment
  int test_size = 500;
  std::uint64_t test_seed = 20240601;    // fixed test set shared by all runs

  std::string name() const { return to_string(system); }
  int input_dim() const { return low_fidelity.input_dim(); }
  int output_dim() const { return low_fidelity.output_dim(); }
  Vector noise_variance() const { return noise_std.array().square(); }
  Matrix skip_matrix() const;
  Normalizer normalizer() const;
  void validate() const;
};

TaskConfig default_task(SystemKind system);

enum class Method { kSimpel, kSimpelOnlySim, kFsvgd, kSvgd, kGreyBox, kSysId };

std::string to_string(Method method);
Method parse_method(std::string_view name);
const std::vector<Method>& all_methods();

struct MethodConfig {
  std::vector<int> hidden{32, 32};
  Activation activation = Activation::kTanh;
  int num_particles = 10;
  FsvgdConfig fsvgd;    // measurement box and size are taken from the task
  SvgdConfig svgd;
  SysIdConfig sysid;
  bool learn_noise = false;      // replace sigma^2 by its held-out MLE
  double holdout_fraction = 0.2; // share of the training rows held out for it

  void validate() const;
};

/// Per-output sigma^2 maximizing the held-out likelihood of
/// N(y | mean, epistemic + sigma^2) for the given model.
Vector heldout_noise_mle(const FittedModel& model, const Dataset& holdout);

MlpArchitecture task_architecture(const TaskConfig& task, const MethodConfig& config);

/// Simulator + gap prior (or the simulator alone when with_gap is false).
std::unique_ptr<FunctionPrior> simulation_prior(const TaskConfig& task, bool with_gap);
/// GP prior centered on the normalizer offset (no simulator knowledge).
std::unique_ptr<FunctionPrior> generic_prior(const TaskConfig& task);

/// Trains one method on the data and returns the fitted model. With
/// learn_noise, a first fit on part of the data sets sigma^2 by held-out
/// MLE and the final model is trained on all rows with that sigma^2.
std::unique_ptr<FittedModel> fit_method(Method method, const TaskConfig& task,
                                        const Dataset& train, const MethodConfig& config,
                                        std::uint64_t seed);

/// Continues functional training of an existing ensemble (used between RL
/// episodes); `method` must be simpel, simpel-only-sim or fsvgd.
void continue_training(ParticleEnsemble& ensemble, Method method, const TaskConfig& task,
                       const Dataset& train, const MethodConfig& config, int iterations,
                       std::uint64_t seed);

}  // namespace simpel
