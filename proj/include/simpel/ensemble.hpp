#pragma once

#include <string>
#include <vector>

#include "simpel/common.hpp"
#include "simpel/mlp.hpp"

namespace simpel {

/// Inputs X^D (m x d_x) and targets y^D (m x d_y).
struct Dataset {
  Matrix X;
  Matrix y;

  Eigen::Index size() const { return X.rows(); }
  bool empty() const { return X.rows() == 0; }
  void validate() const;
  /// Rows [begin, begin + count).
  Dataset slice(Eigen::Index begin, Eigen::Index count) const;
  Dataset rows(const std::vector<Eigen::Index>& index) const;
  void append(const Dataset& other);
};

/// Affine maps around the raw network: inputs from a box onto [-1, 1] and
/// network outputs onto output units via center + scale * net(x) + skip * x.
/// The skip term lets dynamics models predict next states as the current
/// state plus a learned increment.
struct Normalizer {
  Vector input_lower;
  Vector input_upper;
  Vector output_center;
  Vector output_scale;
  Matrix output_skip;  // d_y x d_x; empty means zero

  static Normalizer identity(int input_dim, int output_dim);
  Matrix normalize_inputs(const Matrix& X) const;
  /// center + skip * x for every row of X.
  Matrix output_offset(const Matrix& X) const;
  void validate(int input_dim, int output_dim) const;
};

struct Prediction {
  Matrix mean;
  Matrix epistemic_variance;  // particle variance, divisor L - 1 (0 for L = 1)
  Matrix total_variance;      // epistemic + sigma^2
};

/// Anything that yields per-particle mean functions and a noise model.
class FittedModel {
 public:
  virtual ~FittedModel() = default;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual int num_particles() const = 0;
  /// Mean function of one particle at the rows of X (rows x d_y).
  virtual Matrix particle_mean(int particle, const Matrix& X) const = 0;
  virtual Vector noise_variance() const = 0;
  virtual Prediction predict(const Matrix& X) const;
};

/// Moments over particles of an arbitrary model.
Prediction particle_moments(const FittedModel& model, const Matrix& X);

/// (y - h) / sigma^2 per output column.
Matrix likelihood_score(const Matrix& h, const Matrix& y, const Vector& noise_variance);

class ParticleEnsemble final : public FittedModel {
 public:
  ParticleEnsemble(MlpArchitecture arch, Normalizer normalizer, Vector noise_variance,
                   std::vector<Vector> particles);

  /// L particles with independent fan-in initialization, one RNG stream each.
  static ParticleEnsemble initialize(const MlpArchitecture& arch, const Normalizer& normalizer,
                                     const Vector& noise_variance, int num_particles,
                                     std::uint64_t seed);

  int input_dim() const override { return mlp_.architecture().input_dim; }
  int output_dim() const override { return mlp_.architecture().output_dim; }
  int num_particles() const override { return static_cast<int>(particles_.size()); }
  Matrix particle_mean(int particle, const Matrix& X) const override;
  Vector noise_variance() const override { return noise_variance_; }

  /// Gradient w.r.t. theta_l of sum(upstream .* h_l(X)) in output units.
  Vector particle_vjp(int particle, const Matrix& X, const Matrix& upstream,
                      Matrix* outputs = nullptr) const;
  /// Output-major Jacobian of h_l(X) in output units.
  Matrix particle_jacobian(int particle, const Matrix& X) const;

  const Mlp& mlp() const { return mlp_; }
  const MlpArchitecture& architecture() const { return mlp_.architecture(); }
  const Normalizer& normalizer() const { return normalizer_; }
  const std::vector<Vector>& particles() const { return particles_; }
  std::vector<Vector>& particles() { return particles_; }
  void set_noise_variance(Vector noise_variance);

 private:
  Mlp mlp_;
  Normalizer normalizer_;
  Vector noise_variance_;
  std::vector<Vector> particles_;
};

/// Versioned binary checkpoint: magic "SPENSMB\0", uint32 version, the
/// architecture, the normalizer, L, sigma^2 and the flat particles.
void save_checkpoint(const std::string& path, const ParticleEnsemble& ensemble);
ParticleEnsemble load_checkpoint(const std::string& path);

}  // namespace simpel
