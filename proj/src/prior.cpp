#include "simpel/prior.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace simpel {

void MeasurementDistribution::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw ConfigError("measurement box needs matching, nonempty lower/upper bounds");
  }
  if ((lower.array() > upper.array()).any() || !lower.allFinite() || !upper.allFinite()) {
    throw ConfigError("measurement box needs finite bounds with lower <= upper");
  }
  if (size < 0) throw ConfigError("measurement set size must be nonnegative");
}

Matrix sample_measurement_set(const MeasurementDistribution& zeta, Rng& rng) {
  zeta.validate();
  Matrix X(zeta.size, zeta.input_dim());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = uniform(zeta.lower(c), zeta.upper(c), rng);
  }
  return X;
}

std::string to_string(Correlation c) {
  return c == Correlation::kSquaredExponential ? "squared-exponential" : "matern52";
}

Correlation parse_correlation(std::string_view name) {
  if (name == "squared-exponential" || name == "se" || name == "rbf") {
    return Correlation::kSquaredExponential;
  }
  if (name == "matern52" || name == "matern-5/2") return Correlation::kMatern52;
  throw ConfigError("unknown correlation '" + std::string(name) + "'");
}

void GapKernelConfig::validate() const {
  if (!(variance > 0.0)) throw ConfigError("gap kernel variance must be positive");
  if (!(lengthscale > 0.0)) throw ConfigError("gap kernel lengthscale must be positive");
  if (jitter && *jitter < 0.0) throw ConfigError("gap kernel jitter must be nonnegative");
}

double correlation(Correlation c, double r) {
  if (c == Correlation::kSquaredExponential) return std::exp(-0.5 * r * r);
  const double s = std::sqrt(5.0) * r;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

Matrix gap_kernel_matrix(const Matrix& X, const GapKernelConfig& config) {
  config.validate();
  require_finite(X, "kernel inputs");
  const Eigen::Index k = X.rows();
  Matrix K(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    K(a, a) = config.variance + config.effective_jitter();
    for (Eigen::Index b = a + 1; b < k; ++b) {
      const double r = (X.row(a) - X.row(b)).norm() / config.lengthscale;
      const double v = config.variance * correlation(config.correlation, r);
      K(a, b) = v;
      K(b, a) = v;
    }
  }
  return K;
}

Matrix sample_gap_functions(const Matrix& K, int n, Rng& rng) {
  if (K.rows() != K.cols()) throw ShapeError("kernel matrix must be square");
  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization of the gap kernel failed; increase the jitter");
  }
  const Matrix z = standard_normal(n, K.rows(), rng);
  // Rows are draws: (L z_j)^T = z_j^T L^T.
  return z * llt.matrixL().transpose();
}

void PriorSampleMatrix::validate() const {
  if (outputs.empty()) throw ShapeError("prior sample matrix has no output dimensions");
  for (const auto& m : outputs) {
    if (m.rows() != outputs[0].rows() || m.cols() != outputs[0].cols()) {
      throw ShapeError("prior sample blocks differ in shape");
    }
    if (!m.allFinite()) throw NumericalError("prior samples contain non-finite values");
  }
  if (X.size() > 0 && X.rows() != outputs[0].cols()) {
    throw ShapeError("measurement set rows must equal prior sample columns");
  }
}

const GapKernelConfig& gap_for_output(const std::vector<GapKernelConfig>& gaps, int output) {
  if (gaps.size() == 1) return gaps[0];
  if (output < 0 || static_cast<std::size_t>(output) >= gaps.size()) {
    throw ConfigError("need one gap kernel or one per output dimension");
  }
  return gaps[static_cast<std::size_t>(output)];
}

PriorSampleMatrix sample_prior_matrix(const Matrix& X, const SimulatorModel& sim,
                                      const ParamPrior& prior,
                                      const std::vector<GapKernelConfig>& gaps, int num_samples,
                                      Rng& rng) {
  if (X.cols() != sim.input_dim()) {
    throw ShapeError("measurement set columns do not match the simulator input dimension");
  }
  if (num_samples < 1) throw InvalidInputError("need at least one prior sample");
  if (!gaps.empty() && gaps.size() != 1 &&
      static_cast<int>(gaps.size()) != sim.output_dim()) {
    throw ConfigError("need one gap kernel or one per output dimension");
  }
  constexpr int kMaxRetries = 10;
  const int dy = sim.output_dim();
  const Eigen::Index k = X.rows();

  PriorSampleMatrix out;
  out.X = X;
  out.outputs.assign(static_cast<std::size_t>(dy), Matrix(num_samples, k));

  const std::uint64_t base = rng();
  for (int j = 0; j < num_samples; ++j) {
    Rng row_rng(derive_seed(base, static_cast<std::uint64_t>(j)));
    bool done = false;
    for (int attempt = 0; attempt <= kMaxRetries && !done; ++attempt) {
      const SimParams phi = prior.sample(row_rng);
      try {
        const Matrix g = sim.evaluate_batch(X, phi);
        for (int i = 0; i < dy; ++i) out.outputs[static_cast<std::size_t>(i)].row(j) = g.col(i).transpose();
        done = true;
      } catch (const DivergenceError&) {
      }
    }
    if (!done) {
      throw NumericalError("simulator diverged for every retry while sampling the prior");
    }
  }

  if (!gaps.empty()) {
    for (int i = 0; i < dy; ++i) {
      const Matrix K = gap_kernel_matrix(X, gap_for_output(gaps, i));
      out.outputs[static_cast<std::size_t>(i)] += sample_gap_functions(K, num_samples, rng);
    }
  }
  return out;
}

SimulatorGpPrior::SimulatorGpPrior(SimulatorModel sim, std::vector<GapKernelConfig> gaps)
    : sim_(std::move(sim)), gaps_(std::move(gaps)) {
  for (const auto& g : gaps_) g.validate();
  if (!gaps_.empty() && gaps_.size() != 1 && static_cast<int>(gaps_.size()) != sim_.output_dim()) {
    throw ConfigError("need one gap kernel or one per output dimension");
  }
}

PriorSampleMatrix SimulatorGpPrior::sample(const Matrix& X, int num_samples, Rng& rng) const {
  return sample_prior_matrix(X, sim_, sim_.prior(), gaps_, num_samples, rng);
}

GpPrior::GpPrior(int input_dim, Vector mean, std::vector<GapKernelConfig> kernels, Matrix skip)
    : input_dim_(input_dim), mean_(std::move(mean)), skip_(std::move(skip)), kernels_(std::move(kernels)) {
  if (skip_.size() > 0 && (skip_.rows() != mean_.size() || skip_.cols() != input_dim_)) {
    throw ShapeError("GP mean skip matrix must be d_y x d_x");
  }
  if (mean_.size() < 1) throw ConfigError("GP prior needs at least one output");
  if (kernels_.empty() || (kernels_.size() != 1 && kernels_.size() != static_cast<std::size_t>(mean_.size()))) {
    throw ConfigError("need one GP kernel or one per output dimension");
  }
  for (const auto& g : kernels_) g.validate();
}

PriorSampleMatrix GpPrior::sample(const Matrix& X, int num_samples, Rng& rng) const {
  if (X.cols() != input_dim_) throw ShapeError("measurement set columns do not match GP input");
  PriorSampleMatrix out;
  out.X = X;
  for (int i = 0; i < output_dim(); ++i) {
    const Matrix K = gap_kernel_matrix(X, gap_for_output(kernels_, i));
    Matrix draws = sample_gap_functions(K, num_samples, rng);
    draws.array() += mean_(i);
    if (skip_.size() > 0) draws.rowwise() += (X * skip_.row(i).transpose()).transpose();
    out.outputs.push_back(std::move(draws));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kPriorMagic[8] = {'S', 'P', 'P', 'R', 'I', 'O', 'R', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw CorruptArtifactError("prior sample file is truncated");
  return v;
}

void write_row_major(std::ostream& os, const Matrix& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  os.write(reinterpret_cast<const char*>(rm.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rm.size())));
}

Matrix read_row_major(std::istream& is, std::uint64_t rows, std::uint64_t cols) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
      static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  is.read(reinterpret_cast<char*>(rm.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rm.size())));
  if (!is) throw CorruptArtifactError("prior sample file is truncated");
  return rm;
}

}  // namespace

void write_prior_samples(const std::string& path, const PriorSampleMatrix& samples) {
  samples.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInputError("cannot open '" + path + "' for writing");
  os.write(kPriorMagic, sizeof(kPriorMagic));
  write_u64(os, static_cast<std::uint64_t>(samples.num_samples()));
  write_u64(os, static_cast<std::uint64_t>(samples.num_points()));
  write_u64(os, static_cast<std::uint64_t>(samples.output_dim()));
  write_u64(os, static_cast<std::uint64_t>(samples.X.cols()));
  for (const auto& block : samples.outputs) write_row_major(os, block);
  if (samples.X.size() > 0) write_row_major(os, samples.X);
}

PriorSampleMatrix read_prior_samples(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInputError("cannot open prior sample file '" + path + "'");
  char magic[8] = {};
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kPriorMagic, sizeof(magic)) != 0) {
    throw CorruptArtifactError("'" + path + "' is not a prior sample file (bad magic)");
  }
  const auto n = read_u64(is);
  const auto k = read_u64(is);
  const auto dy = read_u64(is);
  const auto dx = read_u64(is);
  constexpr std::uint64_t kLimit = 1ULL << 31;
  if (n == 0 || k == 0 || dy == 0 || n > kLimit || k > kLimit || dy > 1024 || dx > 1024) {
    throw CorruptArtifactError("prior sample file header is implausible");
  }
  PriorSampleMatrix out;
  for (std::uint64_t i = 0; i < dy; ++i) out.outputs.push_back(read_row_major(is, n, k));
  if (dx > 0) out.X = read_row_major(is, k, dx);
  return out;
}

}  // namespace simpel
