#include <gtest/gtest.h>

#include <cmath>

#include "simpel/mlp.hpp"

using namespace simpel;

namespace {

// Output-major central-difference Jacobian.
Matrix numeric_jacobian(const Mlp& mlp, Vector theta, const Matrix& X, double h = 1e-6) {
  const Eigen::Index rows = X.rows() * mlp.architecture().output_dim;
  Matrix j(rows, theta.size());
  for (Eigen::Index p = 0; p < theta.size(); ++p) {
    const double t0 = theta(p);
    theta(p) = t0 + h;
    const Matrix fp = mlp.forward(theta, X);
    theta(p) = t0 - h;
    const Matrix fm = mlp.forward(theta, X);
    theta(p) = t0;
    const Matrix diff = (fp - fm) / (2.0 * h);
    j.col(p) = Eigen::Map<const Vector>(diff.data(), diff.size());  // column-major == output-major
  }
  return j;
}

}  // namespace

TEST(Mlp, ParameterCount) {
  MlpArchitecture a{3, 2, {5, 4}, Activation::kTanh};
  EXPECT_EQ(a.num_params(), (3 * 5 + 5) + (5 * 4 + 4) + (4 * 2 + 2));
  MlpArchitecture affine{3, 2, {}, Activation::kTanh};
  EXPECT_EQ(affine.num_params(), 8);
}

TEST(Mlp, AffineLayerByHand) {
  Mlp mlp({2, 1, {}, Activation::kTanh});
  Vector theta(3);
  theta << 2.0, -1.0, 0.5;  // W = [2, -1], b = 0.5
  Matrix X(2, 2);
  X << 1.0, 1.0, 3.0, -2.0;
  const Matrix out = mlp.forward(theta, X);
  EXPECT_DOUBLE_EQ(out(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(out(1, 0), 8.5);
}

TEST(Mlp, OneHiddenUnitByHand) {
  Mlp mlp({1, 1, {1}, Activation::kSwish});
  Vector theta(4);
  theta << 0.7, 0.1, -2.0, 0.3;
  const double x = 0.4;
  const double z = 0.7 * x + 0.1;
  const double expected = -2.0 * z / (1.0 + std::exp(-z)) + 0.3;
  EXPECT_NEAR(mlp.forward(theta, Matrix::Constant(1, 1, x))(0, 0), expected, 1e-15);
}

class MlpJacobian : public ::testing::TestWithParam<Activation> {};

TEST_P(MlpJacobian, MatchesCentralDifferences) {
  Rng rng(11);
  for (int draw = 0; draw < 5; ++draw) {
    Mlp mlp({2, 3, {6, 5}, GetParam()});
    const Vector theta = mlp.initialize(rng) + 0.1 * standard_normal(mlp.num_params(), 1, rng);
    const Matrix X = standard_normal(4, 2, rng);
    const Matrix analytic = mlp.jacobian(theta, X);
    const Matrix numeric = numeric_jacobian(mlp, theta, X);
    EXPECT_LT((analytic - numeric).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST_P(MlpJacobian, VjpIsJacobianTranspose) {
  Rng rng(12);
  Mlp mlp({3, 2, {7}, GetParam()});
  const Vector theta = mlp.initialize(rng);
  const Matrix X = standard_normal(5, 3, rng);
  const Matrix u = standard_normal(5, 2, rng);
  const Vector via_j = mlp.jacobian(theta, X).transpose() * Eigen::Map<const Vector>(u.data(), u.size());
  EXPECT_LT((mlp.vjp(theta, X, u) - via_j).cwiseAbs().maxCoeff(), 1e-12);
  Matrix out;
  const Vector fused = mlp.forward_vjp(theta, X, u, &out);
  EXPECT_LT((fused - via_j).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((out - mlp.forward(theta, X)).cwiseAbs().maxCoeff(), 1e-15);
}

INSTANTIATE_TEST_SUITE_P(Activations, MlpJacobian,
                         ::testing::Values(Activation::kTanh, Activation::kSwish));

TEST(Mlp, FanInInitialization) {
  Rng rng(3);
  Mlp mlp({1, 1, {400}, Activation::kTanh});
  const Vector theta = mlp.initialize(rng);
  // Layer 2 weights: 400 draws of N(0, 1/400); its bias is zero.
  const Vector w2 = theta.segment(800, 400);
  EXPECT_NEAR(w2.squaredNorm() / 400.0, 1.0 / 400.0, 0.25 / 400.0);
  EXPECT_EQ(theta.segment(400, 400).norm(), 0.0);
  EXPECT_EQ(theta(theta.size() - 1), 0.0);
}

TEST(Mlp, ShapeErrors) {
  Mlp mlp({2, 1, {3}, Activation::kTanh});
  EXPECT_THROW(mlp.forward(Vector::Zero(5), Matrix::Zero(1, 2)), ShapeError);
  EXPECT_THROW(mlp.forward(Vector::Zero(mlp.num_params()), Matrix::Zero(1, 3)), ShapeError);
  EXPECT_THROW(mlp.vjp(Vector::Zero(mlp.num_params()), Matrix::Zero(2, 2), Matrix::Zero(3, 1)),
               ShapeError);
}

TEST(Mlp, ActivationNames) {
  EXPECT_EQ(parse_activation("swish"), Activation::kSwish);
  EXPECT_EQ(to_string(Activation::kTanh), "tanh");
  EXPECT_THROW(parse_activation("relu6"), ConfigError);
}
