#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace simpel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Error hierarchy. The CLI maps these onto exit codes:
// ConfigError / InvalidInputError -> 2, CorruptArtifactError -> 3,
// NumericalError (and subclasses) -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CorruptArtifactError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Mixes a master seed with a stream index (SplitMix64 finalizer). Used to
/// give every row / particle / experiment cell its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Fills a rows x cols matrix with i.i.d. standard normal draws.
Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

double uniform(double lower, double upper, Rng& rng);

bool all_finite(const Matrix& m);

void require_finite(const Matrix& m, const std::string& what);

/// Median of the pairwise squared Euclidean distances between rows.
double median_pairwise_sq_distance(const Matrix& rows);

/// Runs fn(0..n-1) on up to `workers` threads. The first exception thrown by
/// any task is rethrown after all threads have joined.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace simpel
