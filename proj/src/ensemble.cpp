#include "simpel/ensemble.hpp"

#include <cstring>
#include <fstream>

namespace simpel {

void Dataset::validate() const {
  if (X.rows() != y.rows()) throw ShapeError("dataset inputs and targets differ in row count");
  require_finite(X, "dataset inputs");
  require_finite(y, "dataset targets");
}

Dataset Dataset::slice(Eigen::Index begin, Eigen::Index count) const {
  return {X.middleRows(begin, count), y.middleRows(begin, count)};
}

Dataset Dataset::rows(const std::vector<Eigen::Index>& index) const {
  Dataset out{Matrix(static_cast<Eigen::Index>(index.size()), X.cols()),
              Matrix(static_cast<Eigen::Index>(index.size()), y.cols())};
  for (std::size_t i = 0; i < index.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(index[i]);
    out.y.row(static_cast<Eigen::Index>(i)) = y.row(index[i]);
  }
  return out;
}

void Dataset::append(const Dataset& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  if (other.X.cols() != X.cols() || other.y.cols() != y.cols()) {
    throw ShapeError("cannot append datasets of different widths");
  }
  Matrix nx(X.rows() + other.X.rows(), X.cols());
  nx << X, other.X;
  Matrix ny(y.rows() + other.y.rows(), y.cols());
  ny << y, other.y;
  X = std::move(nx);
  y = std::move(ny);
}

// ---------------------------------------------------------------------------

Normalizer Normalizer::identity(int input_dim, int output_dim) {
  return {Vector::Constant(input_dim, -1.0), Vector::Constant(input_dim, 1.0),
          Vector::Zero(output_dim), Vector::Ones(output_dim), Matrix()};
}

void Normalizer::validate(int input_dim, int output_dim) const {
  if (input_lower.size() != input_dim || input_upper.size() != input_dim ||
      output_center.size() != output_dim || output_scale.size() != output_dim) {
    throw ShapeError("normalizer does not match the network dimensions");
  }
  if ((input_upper.array() < input_lower.array()).any()) {
    throw ConfigError("normalizer input box needs lower <= upper");
  }
  if ((output_scale.array() <= 0.0).any()) throw ConfigError("output scale must be positive");
  if (output_skip.size() > 0 && (output_skip.rows() != output_dim || output_skip.cols() != input_dim)) {
    throw ShapeError("output skip matrix must be d_y x d_x");
  }
}

Matrix Normalizer::output_offset(const Matrix& X) const {
  Matrix out(X.rows(), output_center.size());
  out.rowwise() = output_center.transpose();
  if (output_skip.size() > 0) out += X * output_skip.transpose();
  return out;
}

Matrix Normalizer::normalize_inputs(const Matrix& X) const {
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double width = input_upper(c) - input_lower(c);
    if (width > 0.0) {
      out.col(c) = (2.0 / width) * (X.col(c).array() - input_lower(c)) - 1.0;
    } else {
      out.col(c) = X.col(c).array() - input_lower(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Prediction particle_moments(const FittedModel& model, const Matrix& X) {
  const int L = model.num_particles();
  if (L < 1) throw InvalidInputError("model has no particles");
  Matrix sum = Matrix::Zero(X.rows(), model.output_dim());
  std::vector<Matrix> values;
  values.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    values.push_back(model.particle_mean(l, X));
    sum += values.back();
  }
  Prediction p;
  p.mean = sum / static_cast<double>(L);
  p.epistemic_variance = Matrix::Zero(X.rows(), model.output_dim());
  if (L > 1) {
    for (const auto& v : values) p.epistemic_variance += (v - p.mean).array().square().matrix();
    p.epistemic_variance /= static_cast<double>(L - 1);
  }
  p.total_variance = p.epistemic_variance;
  p.total_variance.rowwise() += model.noise_variance().transpose();
  return p;
}

Prediction FittedModel::predict(const Matrix& X) const { return particle_moments(*this, X); }

Matrix likelihood_score(const Matrix& h, const Matrix& y, const Vector& noise_variance) {
  if (h.rows() != y.rows() || h.cols() != y.cols()) {
    throw ShapeError("function values and targets differ in shape");
  }
  if (noise_variance.size() != h.cols()) throw ShapeError("noise variance has the wrong length");
  if ((noise_variance.array() <= 0.0).any()) {
    throw InvalidInputError("observation noise variance must be positive");
  }
  return (y - h).array().rowwise() / noise_variance.transpose().array();
}

// ---------------------------------------------------------------------------

ParticleEnsemble::ParticleEnsemble(MlpArchitecture arch, Normalizer normalizer,
                                   Vector noise_variance, std::vector<Vector> particles)
    : mlp_(std::move(arch)),
      normalizer_(std::move(normalizer)),
      noise_variance_(std::move(noise_variance)),
      particles_(std::move(particles)) {
  normalizer_.validate(input_dim(), output_dim());
  set_noise_variance(noise_variance_);
  if (particles_.empty()) throw InvalidInputError("ensemble needs at least one particle");
  for (const auto& p : particles_) {
    if (p.size() != mlp_.num_params()) throw ShapeError("particle length does not match the network");
  }
}

ParticleEnsemble ParticleEnsemble::initialize(const MlpArchitecture& arch,
                                              const Normalizer& normalizer,
                                              const Vector& noise_variance, int num_particles,
                                              std::uint64_t seed) {
  if (num_particles < 1) throw ConfigError("need at least one particle");
  const Mlp mlp(arch);
  std::vector<Vector> particles;
  for (int l = 0; l < num_particles; ++l) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(l)));
    particles.push_back(mlp.initialize(rng));
  }
  return ParticleEnsemble(arch, normalizer, noise_variance, std::move(particles));
}

void ParticleEnsemble::set_noise_variance(Vector noise_variance) {
  if (noise_variance.size() != output_dim()) throw ShapeError("noise variance has the wrong length");
  if ((noise_variance.array() <= 0.0).any() || !noise_variance.allFinite()) {
    throw ConfigError("observation noise variance must be positive");
  }
  noise_variance_ = std::move(noise_variance);
}

Matrix ParticleEnsemble::particle_mean(int particle, const Matrix& X) const {
  Matrix h = mlp_.forward(particles_.at(static_cast<std::size_t>(particle)),
                          normalizer_.normalize_inputs(X));
  h = h.array().rowwise() * normalizer_.output_scale.transpose().array();
  return h + normalizer_.output_offset(X);
}

Vector ParticleEnsemble::particle_vjp(int particle, const Matrix& X, const Matrix& upstream,
                                      Matrix* outputs) const {
  const Matrix scaled = upstream.array().rowwise() * normalizer_.output_scale.transpose().array();
  Vector g = mlp_.forward_vjp(particles_.at(static_cast<std::size_t>(particle)),
                              normalizer_.normalize_inputs(X), scaled, outputs);
  if (outputs != nullptr) {
    *outputs = outputs->array().rowwise() * normalizer_.output_scale.transpose().array();
    *outputs += normalizer_.output_offset(X);
  }
  return g;
}

Matrix ParticleEnsemble::particle_jacobian(int particle, const Matrix& X) const {
  Matrix J = mlp_.jacobian(particles_.at(static_cast<std::size_t>(particle)),
                           normalizer_.normalize_inputs(X));
  const Eigen::Index rows = X.rows();
  for (int o = 0; o < output_dim(); ++o) J.middleRows(o * rows, rows) *= normalizer_.output_scale(o);
  return J;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'P', 'E', 'N', 'S', 'M', 'B', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CorruptArtifactError("checkpoint is truncated");
  return v;
}

void put_vector(std::ostream& os, const Vector& v) {
  put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
}

Vector take_vector(std::istream& is, std::uint64_t max_len) {
  const auto n = take<std::uint64_t>(is);
  if (n > max_len) throw CorruptArtifactError("checkpoint vector length is implausible");
  Vector v(static_cast<Eigen::Index>(n));
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n)));
  if (!is) throw CorruptArtifactError("checkpoint is truncated");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParticleEnsemble& e) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInputError("cannot open '" + path + "' for writing");
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  const auto& arch = e.architecture();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(arch.input_dim));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(arch.output_dim));
  put<std::uint32_t>(os, arch.activation == Activation::kTanh ? 0u : 1u);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(arch.hidden.size()));
  for (int w : arch.hidden) put<std::uint32_t>(os, static_cast<std::uint32_t>(w));
  put_vector(os, e.normalizer().input_lower);
  put_vector(os, e.normalizer().input_upper);
  put_vector(os, e.normalizer().output_center);
  put_vector(os, e.normalizer().output_scale);
  const Matrix& skip = e.normalizer().output_skip;
  put<std::uint32_t>(os, static_cast<std::uint32_t>(skip.rows()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(skip.cols()));
  put_vector(os, Eigen::Map<const Vector>(skip.data(), skip.size()));
  put_vector(os, e.noise_variance());
  put<std::uint64_t>(os, static_cast<std::uint64_t>(e.num_particles()));
  for (const auto& p : e.particles()) put_vector(os, p);
  if (!os) throw Error("failed writing checkpoint '" + path + "'");
}

ParticleEnsemble load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInputError("cannot open checkpoint '" + path + "'");
  char magic[8] = {};
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CorruptArtifactError("'" + path + "' is not an ensemble checkpoint (bad magic)");
  }
  const auto version = take<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw CorruptArtifactError("unsupported checkpoint version " + std::to_string(version));
  }
  constexpr std::uint32_t kMaxDim = 1u << 16;
  MlpArchitecture arch;
  arch.input_dim = static_cast<int>(take<std::uint32_t>(is));
  arch.output_dim = static_cast<int>(take<std::uint32_t>(is));
  const auto act = take<std::uint32_t>(is);
  const auto depth = take<std::uint32_t>(is);
  if (arch.input_dim == 0 || arch.output_dim == 0 || static_cast<std::uint32_t>(arch.input_dim) > kMaxDim ||
      static_cast<std::uint32_t>(arch.output_dim) > kMaxDim || act > 1 || depth > 64) {
    throw CorruptArtifactError("checkpoint architecture header is implausible");
  }
  arch.activation = act == 0 ? Activation::kTanh : Activation::kSwish;
  arch.hidden.clear();
  for (std::uint32_t i = 0; i < depth; ++i) {
    const auto w = take<std::uint32_t>(is);
    if (w == 0 || w > kMaxDim) throw CorruptArtifactError("checkpoint layer width is implausible");
    arch.hidden.push_back(static_cast<int>(w));
  }
  Normalizer norm;
  norm.input_lower = take_vector(is, kMaxDim);
  norm.input_upper = take_vector(is, kMaxDim);
  norm.output_center = take_vector(is, kMaxDim);
  norm.output_scale = take_vector(is, kMaxDim);
  const auto skip_rows = take<std::uint32_t>(is);
  const auto skip_cols = take<std::uint32_t>(is);
  if (skip_rows > kMaxDim || skip_cols > kMaxDim) throw CorruptArtifactError("checkpoint skip shape is implausible");
  const Vector skip = take_vector(is, static_cast<std::uint64_t>(skip_rows) * skip_cols);
  if (static_cast<std::uint64_t>(skip.size()) != static_cast<std::uint64_t>(skip_rows) * skip_cols) {
    throw CorruptArtifactError("checkpoint skip matrix is inconsistent");
  }
  norm.output_skip = Eigen::Map<const Matrix>(skip.data(), skip_rows, skip_cols);
  Vector noise = take_vector(is, kMaxDim);
  const auto L = take<std::uint64_t>(is);
  if (L == 0 || L > (1u << 20)) throw CorruptArtifactError("checkpoint particle count is implausible");
  const auto n_params = static_cast<std::uint64_t>(arch.num_params());
  std::vector<Vector> particles;
  for (std::uint64_t l = 0; l < L; ++l) {
    particles.push_back(take_vector(is, n_params));
    if (static_cast<std::uint64_t>(particles.back().size()) != n_params) {
      throw CorruptArtifactError("checkpoint particle length does not match the architecture");
    }
  }
  try {
    return ParticleEnsemble(arch, norm, noise, std::move(particles));
  } catch (const CorruptArtifactError&) {
    throw;
  } catch (const Error& e) {
    throw CorruptArtifactError(std::string("checkpoint content is invalid: ") + e.what());
  }
}

}  // namespace simpel
