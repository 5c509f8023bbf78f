#include "simpel/mlp.hpp"

#include <cmath>

namespace simpel {

namespace {

using ConstMatMap = Eigen::Map<const Matrix>;
using MatMap = Eigen::Map<Matrix>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix activate(Activation act, const Matrix& z) {
  if (act == Activation::kTanh) return z.array().tanh().matrix();
  return z.unaryExpr([](double x) { return x * sigmoid(x); });
}

Matrix activate_derivative(Activation act, const Matrix& z) {
  if (act == Activation::kTanh) return (1.0 - z.array().tanh().square()).matrix();
  return z.unaryExpr([](double x) {
    const double s = sigmoid(x);
    return s + x * s * (1.0 - s);
  });
}

}  // namespace

std::string to_string(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "swish";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "swish" || name == "silu") return Activation::kSwish;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

void MlpArchitecture::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("network dimensions must be >= 1");
  for (int w : hidden) {
    if (w < 1) throw ConfigError("hidden layer widths must be >= 1");
  }
}

Eigen::Index MlpArchitecture::num_params() const {
  Eigen::Index total = 0;
  Eigen::Index in = input_dim;
  for (int w : hidden) {
    total += (in + 1) * w;
    in = w;
  }
  return total + (in + 1) * output_dim;
}

Mlp::Mlp(MlpArchitecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  Eigen::Index in = arch_.input_dim;
  Eigen::Index offset = 0;
  auto add = [&](Eigen::Index out) {
    layers_.push_back({in, out, offset});
    offset += (in + 1) * out;
    in = out;
  };
  for (int w : arch_.hidden) add(w);
  add(arch_.output_dim);
  num_params_ = offset;
}

void Mlp::check_inputs(const Vector& theta, const Matrix& X) const {
  if (theta.size() != num_params_) {
    throw ShapeError("parameter vector length " + std::to_string(theta.size()) +
                     " does not match the architecture (" + std::to_string(num_params_) + ")");
  }
  if (X.cols() != arch_.input_dim) throw ShapeError("network input has the wrong width");
}

Matrix Mlp::forward(const Vector& theta, const Matrix& X) const {
  check_inputs(theta, X);
  Matrix a = X;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const ConstMatMap W(theta.data() + l.offset, l.out, l.in);
    const Eigen::Map<const Vector> b(theta.data() + l.offset + l.in * l.out, l.out);
    Matrix z = a * W.transpose();
    z.rowwise() += b.transpose();
    a = (i + 1 < layers_.size()) ? activate(arch_.activation, z) : std::move(z);
  }
  return a;
}

Vector Mlp::forward_vjp(const Vector& theta, const Matrix& X, const Matrix& upstream,
                        Matrix* outputs) const {
  check_inputs(theta, X);
  if (upstream.rows() != X.rows() || upstream.cols() != arch_.output_dim) {
    throw ShapeError("upstream gradient shape does not match the network output");
  }
  const std::size_t n_layers = layers_.size();
  std::vector<Matrix> acts;   // input to each layer
  std::vector<Matrix> pre;    // pre-activation of each hidden layer
  acts.reserve(n_layers);
  pre.reserve(n_layers);
  Matrix a = X;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const Layer& l = layers_[i];
    const ConstMatMap W(theta.data() + l.offset, l.out, l.in);
    const Eigen::Map<const Vector> b(theta.data() + l.offset + l.in * l.out, l.out);
    Matrix z = a * W.transpose();
    z.rowwise() += b.transpose();
    acts.push_back(std::move(a));
    if (i + 1 < n_layers) {
      a = activate(arch_.activation, z);
      pre.push_back(std::move(z));
    } else {
      a = std::move(z);
    }
  }
  if (outputs != nullptr) *outputs = std::move(a);

  Vector grad = Vector::Zero(num_params_);
  Matrix delta = upstream;
  for (std::size_t k = n_layers; k-- > 0;) {
    const Layer& l = layers_[k];
    MatMap gW(grad.data() + l.offset, l.out, l.in);
    gW.noalias() = delta.transpose() * acts[k];
    grad.segment(l.offset + l.in * l.out, l.out) = delta.colwise().sum().transpose();
    if (k > 0) {
      const ConstMatMap W(theta.data() + l.offset, l.out, l.in);
      Matrix back = delta * W;
      delta = back.cwiseProduct(activate_derivative(arch_.activation, pre[k - 1]));
    }
  }
  return grad;
}

Vector Mlp::vjp(const Vector& theta, const Matrix& X, const Matrix& upstream) const {
  return forward_vjp(theta, X, upstream, nullptr);
}

Matrix Mlp::jacobian(const Vector& theta, const Matrix& X) const {
  check_inputs(theta, X);
  const Eigen::Index rows = X.rows();
  const Eigen::Index dy = arch_.output_dim;
  Matrix J(rows * dy, num_params_);
  Matrix upstream = Matrix::Zero(1, dy);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Matrix x = X.row(r);
    for (Eigen::Index o = 0; o < dy; ++o) {
      upstream.setZero();
      upstream(0, o) = 1.0;
      J.row(o * rows + r) = vjp(theta, x, upstream).transpose();
    }
  }
  return J;
}

Vector Mlp::initialize(Rng& rng) const {
  Vector theta = Vector::Zero(num_params_);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const Layer& l : layers_) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (Eigen::Index i = 0; i < l.in * l.out; ++i) theta(l.offset + i) = scale * normal(rng);
  }
  return theta;
}

}  // namespace simpel
