#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "simpel/common.hpp"

namespace simpel {

enum class Activation { kTanh, kSwish };

std::string to_string(Activation activation);
Activation parse_activation(std::string_view name);

/// Fully connected network shape. An empty hidden list gives a single affine
/// layer, which exists for tests only; configs always require a hidden layer.
struct MlpArchitecture {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<int> hidden{32, 32};
  Activation activation = Activation::kTanh;

  void validate() const;
  Eigen::Index num_params() const;
  bool operator==(const MlpArchitecture& other) const = default;
};

/// Stateless evaluator over flat parameter vectors. Layout per layer: the
/// weight matrix (out x in, column-major) followed by the bias (out).
class Mlp {
 public:
  explicit Mlp(MlpArchitecture arch);

  const MlpArchitecture& architecture() const { return arch_; }
  Eigen::Index num_params() const { return num_params_; }

  /// rows(X) x output_dim.
  Matrix forward(const Vector& theta, const Matrix& X) const;

  /// J^T g where g is the upstream gradient w.r.t. the outputs (same shape as
  /// forward's result); i.e. the gradient of sum(g .* h_theta(X)) w.r.t. theta.
  Vector vjp(const Vector& theta, const Matrix& X, const Matrix& upstream) const;

  /// Forward pass and vjp in one sweep.
  Vector forward_vjp(const Vector& theta, const Matrix& X, const Matrix& upstream,
                     Matrix* outputs) const;

  /// Full Jacobian of the stacked outputs. Rows are output-major: the row for
  /// output o at input r is o * rows(X) + r.
  Matrix jacobian(const Vector& theta, const Matrix& X) const;

  /// Weights ~ N(0, 1 / fan_in), biases zero.
  Vector initialize(Rng& rng) const;

 private:
  struct Layer {
    Eigen::Index in;
    Eigen::Index out;
    Eigen::Index offset;  // start of W; the bias follows at offset + in * out
  };

  void check_inputs(const Vector& theta, const Matrix& X) const;

  MlpArchitecture arch_;
  std::vector<Layer> layers_;
  Eigen::Index num_params_ = 0;
};

}  // namespace simpel
