#include <gtest/gtest.h>

#include <cmath>

#include "linear_prior.hpp"
#include "simpel/eval.hpp"
#include "simpel/inference.hpp"

using namespace simpel;

namespace {

ParticleEnsemble random_ensemble(int particles, std::uint64_t seed) {
  MlpArchitecture arch{2, 2, {6}, Activation::kTanh};
  Normalizer norm = Normalizer::identity(2, 2);
  return ParticleEnsemble::initialize(arch, norm, (Vector(2) << 0.04, 0.25).finished(), particles, seed);
}

Dataset toy_data(int m, Rng& rng) {
  return {standard_normal(m, 2, rng), standard_normal(m, 2, rng)};
}

}  // namespace

TEST(SvgdPhi, TwoParticlesByHand) {
  Matrix x(2, 1);
  x << 0.0, 1.0;
  Matrix s(2, 1);
  s << 1.0, -2.0;
  const double h = 0.5;
  const double k = std::exp(-1.0 / h);
  // phi_0 = (1/2)[k00 s0 + k10 s1 + (2/h)(k10 (x0 - x1))]
  const double phi0 = 0.5 * (1.0 + k * -2.0 + (2.0 / h) * k * (0.0 - 1.0));
  const double phi1 = 0.5 * (k * 1.0 - 2.0 + (2.0 / h) * k * (1.0 - 0.0));
  const Matrix phi = svgd_phi(x, s, h);
  EXPECT_NEAR(phi(0, 0), phi0, 1e-15);
  EXPECT_NEAR(phi(1, 0), phi1, 1e-15);
}

TEST(SvgdPhi, SingleParticleIsScore) {
  Rng rng(1);
  const Matrix x = standard_normal(1, 4, rng);
  const Matrix s = standard_normal(1, 4, rng);
  EXPECT_EQ(svgd_phi(x, s, 0.7), s);
}

TEST(SvgdPhi, RepulsionSeparatesParticlesWithoutScore) {
  Matrix x(2, 1);
  x << -0.1, 0.1;
  const Matrix phi = svgd_phi(x, Matrix::Zero(2, 1), 1.0);
  EXPECT_LT(phi(0, 0), 0.0);
  EXPECT_GT(phi(1, 0), 0.0);
  EXPECT_THROW(svgd_phi(x, Matrix::Zero(3, 1), 1.0), ShapeError);
}

TEST(SvgdBandwidth, MedianOverLogL) {
  Matrix x(3, 1);
  x << 0.0, 1.0, 3.0;  // squared distances 1, 4, 9
  EXPECT_NEAR(svgd_bandwidth(x), 4.0 / std::log(3.0), 1e-14);
  EXPECT_EQ(svgd_bandwidth(Matrix::Zero(1, 1)), 1.0);
}

TEST(Fsvgd, SingleParticleIsFunctionalMapAscent) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const ParticleEnsemble e = random_ensemble(1, 10 + trial);
    const Dataset batch = toy_data(4, rng);
    const Matrix meas = standard_normal(3, 2, rng);
    // Prior score of a standard normal over function values: -h.
    const PriorScoreFn prior = [](const std::vector<Matrix>& q) {
      std::vector<Matrix> out;
      for (const auto& m : q) out.push_back(-m);
      return out;
    };
    const double w = 1.7;
    const StepResult r = fsvgd_direction(e, batch, meas, prior, w);
    Matrix X(7, 2);
    X << batch.X, meas;
    const Matrix h = e.particle_mean(0, X);
    Matrix g = -h;
    g.topRows(4) += w * likelihood_score(h.topRows(4), batch.y, e.noise_variance());
    const Vector expected = e.particle_vjp(0, X, g);
    EXPECT_LT((r.directions[0] - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Svgd, SingleParticleIsWeightSpaceMapAscent) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const ParticleEnsemble e = random_ensemble(1, 20 + trial);
    const Dataset batch = toy_data(5, rng);
    const double lambda2 = 0.8;
    const StepResult r = svgd_direction(e, batch, lambda2, 1.0);
    const Matrix h = e.particle_mean(0, batch.X);
    const Vector expected = e.particle_vjp(0, batch.X, likelihood_score(h, batch.y, e.noise_variance())) -
                            e.particles()[0] / lambda2;
    EXPECT_LT((r.directions[0] - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Optimizer, SgdAndAdamFirstStep) {
  std::vector<Vector> p{Vector::Zero(2)};
  const std::vector<Vector> d{(Vector(2) << 2.0, -0.5).finished()};
  OptimizerConfig sgd;
  sgd.kind = OptimizerKind::kSgd;
  sgd.learning_rate = 0.1;
  Optimizer(sgd).step(p, d);
  EXPECT_NEAR(p[0](0), 0.2, 1e-15);
  EXPECT_NEAR(p[0](1), -0.05, 1e-15);

  std::vector<Vector> q{Vector::Zero(2)};
  OptimizerConfig adam;
  adam.learning_rate = 0.01;
  Optimizer(adam).step(q, d);
  // The bias-corrected first Adam step is lr * sign(direction).
  EXPECT_NEAR(q[0](0), 0.01, 1e-8);
  EXPECT_NEAR(q[0](1), -0.01, 1e-8);
}

TEST(Optimizer, LearningRateDecaysToFinalRatio) {
  OptimizerConfig c;
  c.kind = OptimizerKind::kSgd;
  c.learning_rate = 1.0;
  c.final_lr_ratio = 0.01;
  Optimizer opt(c, 10);
  std::vector<Vector> p{Vector::Zero(1)};
  const std::vector<Vector> d{Vector::Ones(1)};
  double last = 0.0;
  for (int t = 0; t < 11; ++t) {
    const double before = p[0](0);
    opt.step(p, d);
    last = p[0](0) - before;
  }
  EXPECT_NEAR(last, 0.01, 1e-12);
}

TEST(Optimizer, Validation) {
  OptimizerConfig c;
  c.learning_rate = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_optimizer_kind("lbfgs"), ConfigError);
}

TEST(Fsvgd, HugeStepDiverges) {
  ParticleEnsemble e = random_ensemble(3, 5);
  Rng rng(5);
  Dataset d = toy_data(5, rng);
  d.y *= 1e200;
  FsvgdConfig c;
  c.iterations = 50;
  c.optimizer.kind = OptimizerKind::kSgd;
  c.optimizer.learning_rate = 1e100;
  c.measurement = {Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), 4};
  const GpPrior prior(2, Vector::Zero(2), {{1.0, 1.0, Correlation::kSquaredExponential, std::nullopt}});
  EXPECT_THROW(train_fsvgd(e, d, prior, c, 1), NumericalError);
}

TEST(Fsvgd, PriorOnlyTrainingMatchesPriorVariance) {
  // Without data the particles should spread like the prior; the estimate is
  // coarse (few particles) so the bound is loose.
  const oracle::LinearPrior prior(1.0, 1.0);
  MlpArchitecture arch{1, 1, {}, Activation::kTanh};
  ParticleEnsemble e = ParticleEnsemble::initialize(arch, Normalizer::identity(1, 1), Vector::Constant(1, 0.01), 50, 3);
  FsvgdConfig c;
  c.iterations = 2000;
  c.optimizer.learning_rate = 0.01;
  c.measurement = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), 16};
  c.num_prior_samples = 256;
  train_fsvgd(e, Dataset{Matrix(0, 1), Matrix(0, 1)}, prior, c, 4);
  const Prediction p = e.predict(Matrix::Zero(1, 1));
  EXPECT_NEAR(p.epistemic_variance(0, 0), 1.0, 0.3);
}

TEST(Fsvgd, ConjugateLinearRegressionPosterior) {
  // Unit-level version of the conjugate oracle with a larger ensemble, where
  // finite-particle variance shrinkage is smaller.
  const double noise = 0.09;
  Rng rng(0);
  Dataset d{Matrix(10, 1), Matrix(10, 1)};
  for (int i = 0; i < 10; ++i) {
    d.X(i, 0) = uniform(-1.0, 1.0, rng);
    d.y(i, 0) = 0.7 * d.X(i, 0) - 0.3 + 0.3 * standard_normal(1, 1, rng)(0, 0);
  }
  const Matrix Xq = Vector::LinSpaced(21, -1.0, 1.0);
  const auto truth = oracle::blr_posterior(d, 1.0, 1.0, noise, Xq);

  MlpArchitecture arch{1, 1, {}, Activation::kTanh};
  ParticleEnsemble e = ParticleEnsemble::initialize(arch, Normalizer::identity(1, 1), Vector::Constant(1, noise), 50, 100);
  FsvgdConfig c;
  c.iterations = 3000;
  c.optimizer.learning_rate = 0.01;
  c.measurement = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), 16};
  c.num_prior_samples = 256;
  train_fsvgd(e, d, oracle::LinearPrior(1.0, 1.0), c, 7);
  const Prediction p = e.predict(Xq);
  EXPECT_LT((p.mean.col(0) - truth.mean).norm() / truth.mean.norm(), 0.05);
  const double var_err = ((p.epistemic_variance.col(0) - truth.variance).array().abs() / truth.variance.array()).maxCoeff();
  EXPECT_LT(var_err, 0.15);
}

TEST(Svgd, ConjugateWeightPosteriorMean) {
  // Weight-space SVGD with a linear model and N(0, I) weight prior targets
  // the same BLR posterior.
  const double noise = 0.09;
  Rng rng(1);
  Dataset d{Matrix(10, 1), Matrix(10, 1)};
  for (int i = 0; i < 10; ++i) {
    d.X(i, 0) = uniform(-1.0, 1.0, rng);
    d.y(i, 0) = -0.4 * d.X(i, 0) + 0.2 + 0.3 * standard_normal(1, 1, rng)(0, 0);
  }
  const Matrix Xq = Vector::LinSpaced(11, -1.0, 1.0);
  const auto truth = oracle::blr_posterior(d, 1.0, 1.0, noise, Xq);
  MlpArchitecture arch{1, 1, {}, Activation::kTanh};
  ParticleEnsemble e = ParticleEnsemble::initialize(arch, Normalizer::identity(1, 1), Vector::Constant(1, noise), 50, 9);
  SvgdConfig c;
  c.iterations = 3000;
  c.optimizer.learning_rate = 0.01;
  train_svgd(e, d, c, 3);
  const Prediction p = e.predict(Xq);
  EXPECT_LT((p.mean.col(0) - truth.mean).norm() / truth.mean.norm(), 0.05);
}

TEST(Fsvgd, DataRowsFollowLikelihoodWeight) {
  const ParticleEnsemble e = random_ensemble(1, 3);
  Rng rng(8);
  const Dataset batch = toy_data(3, rng);
  const PriorScoreFn zero = [](const std::vector<Matrix>& q) {
    std::vector<Matrix> out;
    for (const auto& m : q) out.push_back(Matrix::Zero(m.rows(), m.cols()));
    return out;
  };
  const Matrix none(0, 2);
  const Vector a = fsvgd_direction(e, batch, none, zero, 1.0).directions[0];
  const Vector b = fsvgd_direction(e, batch, none, zero, 3.0).directions[0];
  EXPECT_LT((b - 3.0 * a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GaussianNll, HandComputed) {
  const Matrix mean = Matrix::Zero(1, 1);
  const Matrix var = Matrix::Constant(1, 1, 4.0);
  const Matrix y = Matrix::Constant(1, 1, 2.0);
  EXPECT_NEAR(gaussian_nll(mean, var, y), 0.5 * std::log(2 * M_PI * 4.0) + 0.5, 1e-14);
}
