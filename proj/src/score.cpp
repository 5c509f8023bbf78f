#include "simpel/score.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace simpel {

namespace {

void check_shapes(const Matrix& samples, const Matrix& query) {
  if (samples.rows() < 1) throw InvalidInputError("score estimation needs samples");
  if (samples.cols() != query.cols()) {
    throw ShapeError("query and samples must share the dimension k");
  }
  require_finite(samples, "score samples");
  require_finite(query, "score query");
}

// exp(-|a_i - b_j|^2 / (2 bw^2)) for all row pairs.
Matrix gaussian_gram(const Matrix& a, const Matrix& b, double bw) {
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * a * b.transpose()).eval();
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  return (-d2.array().max(0.0) / (2.0 * bw * bw)).exp().matrix();
}

}  // namespace

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kGaussian: return "gaussian";
    case EstimatorKind::kKde: return "kde";
    case EstimatorKind::kSsge: return "ssge";
    case EstimatorKind::kNuMethod: return "nu-method";
  }
  return "unknown";
}

EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "gaussian") return EstimatorKind::kGaussian;
  if (name == "kde") return EstimatorKind::kKde;
  if (name == "ssge") return EstimatorKind::kSsge;
  if (name == "nu-method" || name == "nu_method" || name == "nu") return EstimatorKind::kNuMethod;
  throw ConfigError("unknown score estimator '" + std::string(name) + "'");
}

void EstimatorConfig::validate() const {
  if (nugget && *nugget < 0.0) throw ConfigError("covariance nugget must be nonnegative");
  if (nugget_relative < 0.0) throw ConfigError("relative nugget must be nonnegative");
  if (kde_bandwidth && !(*kde_bandwidth > 0.0)) throw ConfigError("KDE bandwidth must be positive");
  if (ssge.num_eigen && *ssge.num_eigen < 1) throw ConfigError("SSGE needs J >= 1");
  if (ssge.eigen_threshold && *ssge.eigen_threshold < 0.0) {
    throw ConfigError("SSGE eigenvalue threshold must be nonnegative");
  }
  if (!(ssge.eigen_ratio > 0.0 && ssge.eigen_ratio <= 1.0)) {
    throw ConfigError("SSGE eigenvalue ratio must lie in (0, 1]");
  }
  if (!(ssge.bandwidth_scale > 0.0)) throw ConfigError("SSGE bandwidth scale must be positive");
  if (ssge.bandwidth && !(*ssge.bandwidth > 0.0)) throw ConfigError("kernel bandwidth must be positive");
  if (nu_method.iterations < 0) throw ConfigError("nu-method iteration count must be >= 0");
  if (!(nu_method.nu > 0.0)) throw ConfigError("nu-method nu must be positive");
  if (!(nu_method.step > 0.0)) throw ConfigError("nu-method step must be positive");
  if (!(nu_method.bandwidth_scale > 0.0)) throw ConfigError("nu-method bandwidth scale must be positive");
  if (nu_method.bandwidth && !(*nu_method.bandwidth > 0.0)) {
    throw ConfigError("kernel bandwidth must be positive");
  }
}

double median_bandwidth(const Matrix& samples) {
  return std::sqrt(median_pairwise_sq_distance(samples));
}

double scott_bandwidth(const Matrix& samples) {
  const auto n = static_cast<double>(samples.rows());
  const auto k = static_cast<double>(samples.cols());
  if (samples.rows() < 2) return 1.0;
  const Matrix centered = samples.rowwise() - samples.colwise().mean();
  const Vector stds = (centered.colwise().squaredNorm() / (n - 1.0)).array().sqrt();
  return stds.mean() * std::pow(n, -1.0 / (k + 4.0));
}

// ---------------------------------------------------------------------------

Matrix gaussian_score(const Matrix& samples, const Matrix& query, std::optional<double> nugget,
                      double nugget_relative) {
  check_shapes(samples, query);
  if (samples.rows() < 2) throw InvalidInputError("Gaussian score needs at least two samples");
  const auto n = static_cast<double>(samples.rows());
  const Eigen::Index k = samples.cols();
  const Eigen::RowVectorXd mu = samples.colwise().mean();
  const Matrix centered = samples.rowwise() - mu;
  Matrix sigma = (centered.transpose() * centered) / (n - 1.0);
  const double eta = nugget.value_or(nugget_relative * sigma.trace() / static_cast<double>(k));
  sigma.diagonal().array() += eta;
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("sample covariance is singular; use a larger covariance nugget");
  }
  const Matrix diff = (query.rowwise() - mu).transpose();
  return -llt.solve(diff).transpose();
}

Matrix kde_score(const Matrix& samples, const Matrix& query, std::optional<double> bandwidth) {
  check_shapes(samples, query);
  const double gamma = bandwidth.value_or(scott_bandwidth(samples));
  if (!(gamma > 0.0)) throw NumericalError("KDE bandwidth collapsed to zero (identical samples)");
  const double inv_var = 1.0 / (gamma * gamma);
  Matrix out(query.rows(), query.cols());
  Vector logw(samples.rows());
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    for (Eigen::Index j = 0; j < samples.rows(); ++j) {
      logw(j) = -0.5 * inv_var * (query.row(q) - samples.row(j)).squaredNorm();
    }
    const double m = logw.maxCoeff();
    const Vector w = (logw.array() - m).exp();
    const double z = w.sum();
    const Eigen::RowVectorXd weighted_mean = (w.transpose() * samples) / z;
    out.row(q) = inv_var * (weighted_mean - query.row(q));
  }
  return out;
}

Matrix ssge_score(const Matrix& samples, const Matrix& query, const SsgeOptions& options) {
  check_shapes(samples, query);
  const Eigen::Index n = samples.rows();
  if (options.num_eigen && *options.num_eigen > n) {
    throw InvalidInputError("SSGE needs J <= N");
  }
  const double bw =
      options.bandwidth.value_or(options.bandwidth_scale * median_bandwidth(samples));
  if (!(bw > 0.0)) throw NumericalError("SSGE Gram matrix is degenerate (identical samples)");

  const Matrix gram = gaussian_gram(samples, samples, bw);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("SSGE eigendecomposition failed");
  const Vector& evals = eig.eigenvalues();  // ascending

  // Candidate eigenpairs in descending order; nonpositive values are round-off.
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (evals(i) > 0.0) order.push_back(i);
  }
  if (order.empty()) throw NumericalError("SSGE Gram matrix has no positive eigenvalues");

  std::size_t keep = order.size();
  if (options.num_eigen) keep = std::min(keep, static_cast<std::size_t>(*options.num_eigen));
  if (options.eigen_threshold) {
    std::size_t above = 0;
    while (above < keep && evals(order[above]) / static_cast<double>(n) >= *options.eigen_threshold) {
      ++above;
    }
    keep = above;
  }
  if (!options.num_eigen && !options.eigen_threshold) {
    double total = 0.0;
    for (auto i : order) total += evals(i);
    double acc = 0.0;
    std::size_t j = 0;
    while (j < order.size()) {
      acc += evals(order[j]);
      ++j;
      if (acc >= options.eigen_ratio * total) break;
    }
    keep = j;
  }
  if (keep == 0) return Matrix::Zero(query.rows(), query.cols());

  const auto j_count = static_cast<Eigen::Index>(keep);
  Matrix u(n, j_count);
  Vector scale(j_count);  // sqrt(N) / lambda_j
  for (Eigen::Index j = 0; j < j_count; ++j) {
    u.col(j) = eig.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    scale(j) = std::sqrt(static_cast<double>(n)) / evals(order[static_cast<std::size_t>(j)]);
  }

  // G_m = sum_i k(x_i, x_m) (x_m - x_i) / bw^2, the summed kernel gradient.
  const Vector colsum = gram.colwise().sum().transpose();
  const Matrix g = (samples.array().colwise() * colsum.array()).matrix() - gram * samples;
  const Matrix grad_sum = g / (bw * bw);
  // beta_j = -(1/N) sum_i grad psi_j(x_i)
  const Matrix beta =
      -(scale.asDiagonal() * (u.transpose() * grad_sum)) / static_cast<double>(n);
  const Matrix psi = gaussian_gram(query, samples, bw) * u * scale.asDiagonal();
  return psi * beta;
}

// ---------------------------------------------------------------------------

namespace {

// Curl-free kernel K(x, y) = c * (-Hessian phi)(x - y) with Gaussian phi of
// width bw; c = step * bw^2 normalizes K(x, x) = step * I.
struct CurlFreeKernel {
  double bw;
  double c;

  double phi(double sq) const { return std::exp(-sq / (2.0 * bw * bw)); }

  // K(x, y) v for r = x - y.
  Eigen::RowVectorXd apply(const Eigen::RowVectorXd& r, const Eigen::RowVectorXd& v) const {
    const double b2 = bw * bw;
    const double p = phi(r.squaredNorm());
    return c * p * (v / b2 - r * (r.dot(v)) / (b2 * b2));
  }

  // div_x K(x, y) for r = x - y.
  Eigen::RowVectorXd divergence(const Eigen::RowVectorXd& r) const {
    const double b2 = bw * bw;
    const double sq = r.squaredNorm();
    const auto d = static_cast<double>(r.size());
    return -c * phi(sq) / (b2 * b2) * ((d + 2.0) - sq / b2) * r;
  }
};

// zeta(y) = (1/N) sum_j div_{x_j} K(x_j, y) for every row y of points.
Matrix mean_divergence(const CurlFreeKernel& kernel, const Matrix& samples, const Matrix& points) {
  Matrix out = Matrix::Zero(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(points.cols());
    for (Eigen::Index j = 0; j < samples.rows(); ++j) {
      acc += kernel.divergence(samples.row(j) - points.row(i));
    }
    out.row(i) = acc / static_cast<double>(samples.rows());
  }
  return out;
}

}  // namespace

Matrix nu_method_score(const Matrix& samples, const Matrix& query,
                       const NuMethodOptions& options) {
  check_shapes(samples, query);
  if (options.iterations < 0) throw InvalidInputError("nu-method iteration count must be >= 0");
  if (options.iterations == 0) return Matrix::Zero(query.rows(), query.cols());
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  constexpr Eigen::Index kMaxSystem = 8192;
  if (n * d > kMaxSystem) {
    throw InvalidInputError("nu-method system too large (N * k > 8192); use fewer samples");
  }
  const double bw =
      options.bandwidth.value_or(options.bandwidth_scale * median_bandwidth(samples));
  if (!(bw > 0.0)) throw NumericalError("nu-method kernel is degenerate (identical samples)");
  const CurlFreeKernel kernel{bw, options.step * bw * bw};
  const double nu = options.nu;

  // Block Gram matrix, index (i, a) -> i * d + a.
  const Eigen::Index nd = n * d;
  Matrix gram(nd, nd);
  const double b2 = bw * bw;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const Eigen::RowVectorXd r = samples.row(i) - samples.row(j);
      const double p = kernel.c * kernel.phi(r.squaredNorm());
      for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) {
          const double v = p * ((a == b ? 1.0 / b2 : 0.0) - r(a) * r(b) / (b2 * b2));
          gram(i * d + a, j * d + b) = v;
          gram(j * d + b, i * d + a) = v;
        }
      }
    }
  }
  const Matrix zeta_at_samples = mean_divergence(kernel, samples, samples);
  Vector z(nd);
  for (Eigen::Index i = 0; i < n; ++i) z.segment(i * d, d) = zeta_at_samples.row(i).transpose();

  // s_t = a_t * zeta + sum_j K(., x_j) c_j, iterated with the nu-method
  // recursion on L s = -zeta.
  double a = -(4.0 * nu + 2.0) / (4.0 * nu + 1.0);
  double prev_a = 0.0;
  Vector c = Vector::Zero(nd);
  Vector prev_c = Vector::Zero(nd);
  const double base_norm = std::abs(a) * z.norm();
  const auto inv_n = 1.0 / static_cast<double>(n);
  for (int t = 2; t <= options.iterations; ++t) {
    const auto ft = static_cast<double>(t);
    const double mu = (ft - 1.0) * (2.0 * ft - 3.0) * (2.0 * ft + 2.0 * nu - 1.0) /
                      ((ft + 2.0 * nu - 1.0) * (2.0 * ft + 4.0 * nu - 1.0) *
                       (2.0 * ft + 2.0 * nu - 3.0));
    const double omega = 4.0 * (2.0 * ft + 2.0 * nu - 1.0) * (ft + nu - 1.0) /
                         ((ft + 2.0 * nu - 1.0) * (2.0 * ft + 4.0 * nu - 1.0));
    const Vector s_at_samples = a * z + gram * c;
    Vector next_c = (1.0 + mu) * c - mu * prev_c - omega * inv_n * s_at_samples;
    const double next_a = (1.0 + mu) * a - mu * prev_a - omega;
    prev_c = std::move(c);
    c = std::move(next_c);
    prev_a = a;
    a = next_a;
    const double norm = (a * z + gram * c).norm();
    if (!std::isfinite(norm) || (base_norm > 0.0 && norm > 1e6 * base_norm)) {
      throw NumericalError("nu-method iteration diverged; use a smaller step");
    }
  }

  const Matrix zeta_q = mean_divergence(kernel, samples, query);
  Matrix out = a * zeta_q;
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index j = 0; j < n; ++j) {
      acc += kernel.apply(query.row(q) - samples.row(j), c.segment(j * d, d).transpose());
    }
    out.row(q) += acc;
  }
  return out;
}

Matrix estimate_score_single(const EstimatorConfig& config, const Matrix& samples,
                             const Matrix& query) {
  switch (config.kind) {
    case EstimatorKind::kGaussian:
      return gaussian_score(samples, query, config.nugget, config.nugget_relative);
    case EstimatorKind::kKde:
      return kde_score(samples, query, config.kde_bandwidth);
    case EstimatorKind::kSsge:
      return ssge_score(samples, query, config.ssge);
    case EstimatorKind::kNuMethod:
      return nu_method_score(samples, query, config.nu_method);
  }
  throw ConfigError("unknown estimator");
}

std::vector<Matrix> estimate_score(const EstimatorConfig& config, const PriorSampleMatrix& samples,
                                   const std::vector<Matrix>& query) {
  config.validate();
  if (query.size() != samples.outputs.size()) {
    throw ShapeError("query and prior samples differ in output dimension");
  }
  std::vector<Matrix> out;
  out.reserve(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    out.push_back(estimate_score_single(config, samples.outputs[i], query[i]));
  }
  return out;
}

}  // namespace simpel
