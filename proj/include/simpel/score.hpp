#pragma once

#include <optional>
#include <string>
#include <vector>

#include "simpel/common.hpp"
#include "simpel/prior.hpp"

namespace simpel {

// Prior score estimators. Every estimator takes an N x k matrix of samples
// (rows are draws of a k-dimensional random vector) and an M x k matrix of
// query points, and returns the M x k matrix of estimated gradients of the
// log-density at the queries.

enum class EstimatorKind { kGaussian, kKde, kSsge, kNuMethod };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(std::string_view name);

struct SsgeOptions {
  std::optional<int> num_eigen;             // keep the top J eigenpairs
  std::optional<double> eigen_threshold;    // spectral cut-off on operator eigenvalues
  double eigen_ratio = 0.999;               // used when neither of the above is set
  std::optional<double> bandwidth;          // Gaussian kernel width; scaled median heuristic if unset
  double bandwidth_scale = 2.5;             // multiplies the median heuristic
};

struct NuMethodOptions {
  int iterations = 40;                      // early stopping is the regularizer
  double nu = 1.0;
  double step = 1.0;                        // operator scaling; must keep the norm <= 1
  std::optional<double> bandwidth;
  double bandwidth_scale = 2.0;             // multiplies the median heuristic
};

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::kGaussian;
  std::optional<double> nugget;             // absolute; relative default otherwise
  double nugget_relative = 1e-4;            // eta = rel * trace(Sigma) / k
  std::optional<double> kde_bandwidth;      // Scott's rule if unset
  SsgeOptions ssge;
  NuMethodOptions nu_method;

  void validate() const;
};

/// Median-heuristic Gaussian kernel width: sqrt of the median pairwise
/// squared distance between samples.
double median_bandwidth(const Matrix& samples);

/// Scott's rule, averaged over dimensions: mean_d(std_d) * N^(-1/(k+4)).
double scott_bandwidth(const Matrix& samples);

/// -(Sigma + eta I)^{-1} (h - mu) with mu / Sigma the sample mean and the
/// unbiased sample covariance.
Matrix gaussian_score(const Matrix& samples, const Matrix& query,
                      std::optional<double> nugget = std::nullopt,
                      double nugget_relative = 1e-4);

/// Gradient of log (1/N) sum_j N(h | h_j, gamma^2 I), log-sum-exp weighted.
Matrix kde_score(const Matrix& samples, const Matrix& query,
                 std::optional<double> bandwidth = std::nullopt);

/// Spectral Stein gradient estimator: Nystrom eigenfunctions of the Gaussian
/// Gram matrix with spectral cut-off regularization.
Matrix ssge_score(const Matrix& samples, const Matrix& query, const SsgeOptions& options = {});

/// nu-method (accelerated Landweber) score regression in the RKHS of the
/// curl-free kernel -Hessian(phi) derived from a Gaussian phi.
Matrix nu_method_score(const Matrix& samples, const Matrix& query,
                       const NuMethodOptions& options = {});

Matrix estimate_score_single(const EstimatorConfig& config, const Matrix& samples,
                             const Matrix& query);

/// Per-output-dimension estimation; query[i] is scored against
/// samples.outputs[i].
std::vector<Matrix> estimate_score(const EstimatorConfig& config,
                                   const PriorSampleMatrix& samples,
                                   const std::vector<Matrix>& query);

}  // namespace simpel
