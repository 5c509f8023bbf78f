#include "simpel/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

namespace simpel {

namespace {

Matrix uniform_inputs(const Vector& lower, const Vector& upper, int rows, Rng& rng) {
  Matrix X(rows, lower.size());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = uniform(lower(c), upper(c), rng);
  }
  return X;
}

Matrix noisy_targets(const TaskConfig& task, const Matrix& X, Rng& rng) {
  Matrix y = task.truth.evaluate_batch(X, task.truth.fixed_params());
  const Matrix noise = standard_normal(y.rows(), y.cols(), rng);
  return y + (noise.array().rowwise() * task.noise_std.transpose().array()).matrix();
}

}  // namespace

Dataset make_train_set(const TaskConfig& task, int size, Rng& rng) {
  if (size < 0) throw InvalidInputError("training set size must be nonnegative");
  const Vector& lo = task.train_lower ? *task.train_lower : task.domain.lower;
  const Vector& hi = task.train_upper ? *task.train_upper : task.domain.upper;
  Dataset d;
  d.X = uniform_inputs(lo, hi, size, rng);
  d.y = noisy_targets(task, d.X, rng);
  return d;
}

Dataset make_test_set(const TaskConfig& task) {
  Rng rng(task.test_seed);
  Dataset d;
  if (task.input_dim() == 1) {
    d.X = Vector::LinSpaced(task.test_size, task.domain.lower(0), task.domain.upper(0));
  } else {
    d.X = uniform_inputs(task.domain.lower, task.domain.upper, task.test_size, rng);
  }
  d.y = noisy_targets(task, d.X, rng);
  return d;
}

TrainTest make_dataset(const TaskConfig& task, int size, Rng& rng) {
  if (size < 1) throw InvalidInputError("training set size must be >= 1");
  return {make_train_set(task, size, rng), make_test_set(task)};
}

double nll(const Matrix& mean, const Matrix& variance, const Matrix& y) {
  return gaussian_nll(mean, variance, y);
}

double nll(const Prediction& prediction, const Matrix& y) {
  return nll(prediction.mean, prediction.total_variance, y);
}

double rmse(const Matrix& mean, const Matrix& y) {
  if (mean.rows() != y.rows() || mean.cols() != y.cols()) throw ShapeError("RMSE inputs differ in shape");
  if (y.size() == 0) return 0.0;
  return std::sqrt((mean - y).squaredNorm() / static_cast<double>(y.size()));
}

void ExperimentSpec::validate() const {
  task.validate();
  method_config.validate();
  for (std::size_t i = 0; i < train_sizes.size(); ++i) {
    if (train_sizes[i] < 1) throw ConfigError("train sizes must be >= 1");
    if (i > 0 && train_sizes[i] <= train_sizes[i - 1]) {
      throw ConfigError("train sizes must be strictly increasing");
    }
  }
  if (seeds.empty()) throw ConfigError("the seed list must not be empty");
  if (workers < 1) throw ConfigError("worker count must be >= 1");
}

std::uint64_t data_seed(std::uint64_t master, std::uint64_t seed, int train_size) {
  return derive_seed(derive_seed(master, seed), static_cast<std::uint64_t>(train_size));
}

std::uint64_t model_seed(std::uint64_t master, std::uint64_t seed, int train_size, Method method) {
  return derive_seed(data_seed(master, seed, train_size),
                     1000 + static_cast<std::uint64_t>(method));
}

MetricRow run_cell(const ExperimentSpec& spec, Method method, int train_size, std::uint64_t seed) {
  MetricRow row{spec.task.name(), to_string(method), train_size, seed, 0.0, 0.0, 0.0, "ok"};
  const auto start = std::chrono::steady_clock::now();
  try {
    Rng rng(data_seed(spec.master_seed, seed, train_size));
    const TrainTest data = make_dataset(spec.task, train_size, rng);
    const auto model = fit_method(method, spec.task, data.train, spec.method_config,
                                  model_seed(spec.master_seed, seed, train_size, method));
    const Prediction p = model->predict(data.test.X);
    row.nll = nll(p, data.test.y);
    row.rmse = rmse(p.mean, data.test.y);
    if (!std::isfinite(row.nll) || !std::isfinite(row.rmse)) {
      throw NumericalError("non-finite test metric");
    }
  } catch (const std::exception& e) {
    std::string msg = std::string("failed: ") + e.what();
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    row.status = msg;
    row.nll = std::nan("");
    row.rmse = std::nan("");
  }
  if (spec.record_timing) {
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return row;
}

// ---------------------------------------------------------------------------

std::string format_metric_row(const MetricRow& r) {
  std::ostringstream os;
  os << r.task << ',' << r.method << ',' << r.train_size << ',' << r.seed << ','
     << format_double(r.nll) << ',' << format_double(r.rmse) << ',' << format_double(r.wall_time_s)
     << ',' << r.status;
  return os.str();
}

namespace {

constexpr const char* kCsvComment =
    "# nll = mean over test points and output dimensions of -ln N(y | mean, var) in nats";

void write_csv_header(std::ostream& os) { os << kCsvComment << '\n' << kMetricHeader << '\n'; }

double parse_double(const std::string& s) {
  if (s == "nan" || s == "-nan") return std::nan("");
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("bad number");
    return v;
  } catch (const std::exception&) {
    throw CorruptArtifactError("malformed number '" + s + "' in metric table");
  }
}

}  // namespace

void write_metric_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InvalidInputError("cannot open '" + path + "' for writing");
  write_csv_header(os);
  for (const auto& r : rows) os << format_metric_row(r) << '\n';
}

std::vector<MetricRow> read_metric_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInputError("cannot open metric table '" + path + "'");
  std::vector<MetricRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kMetricHeader) throw CorruptArtifactError("'" + path + "' has an unexpected header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) {
      // A partially written trailing line from an interrupted run is dropped.
      if (is.peek() == std::char_traits<char>::eof()) break;
      throw CorruptArtifactError("malformed row in '" + path + "'");
    }
    MetricRow r;
    r.task = f[0];
    r.method = f[1];
    try {
      r.train_size = std::stoi(f[2]);
      r.seed = std::stoull(f[3]);
    } catch (const std::exception&) {
      throw CorruptArtifactError("malformed row in '" + path + "'");
    }
    r.nll = parse_double(f[4]);
    r.rmse = parse_double(f[5]);
    r.wall_time_s = parse_double(f[6]);
    r.status = f[7];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricRow> run_learning_curve(const ExperimentSpec& spec, const std::string& csv_path,
                                          bool resume) {
  spec.validate();
  struct Cell {
    Method method;
    int size;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (Method m : spec.methods) {
    for (int s : spec.train_sizes) {
      for (std::uint64_t seed : spec.seeds) cells.push_back({m, s, seed});
    }
  }
  using Key = std::tuple<std::string, int, std::uint64_t>;
  std::map<Key, MetricRow> done;
  if (resume && !csv_path.empty() && std::filesystem::exists(csv_path)) {
    for (auto& r : read_metric_csv(csv_path)) {
      if (r.task == spec.task.name()) done[{r.method, r.train_size, r.seed}] = r;
    }
  }

  std::vector<std::optional<MetricRow>> results(cells.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto it = done.find({to_string(cells[i].method), cells[i].size, cells[i].seed});
    if (it != done.end()) {
      results[i] = it->second;
    } else {
      todo.push_back(i);
    }
  }

  std::ofstream out;
  std::mutex mutex;
  if (!csv_path.empty()) {
    const bool append = resume && std::filesystem::exists(csv_path);
    if (append) {
      // Rewrite the kept rows so a torn trailing line cannot survive.
      std::vector<MetricRow> kept;
      for (const auto& r : results) {
        if (r) kept.push_back(*r);
      }
      write_metric_csv(csv_path, kept);
      out.open(csv_path, std::ios::app);
    } else {
      out.open(csv_path, std::ios::trunc);
      if (out) write_csv_header(out);
    }
    if (!out) throw InvalidInputError("cannot open '" + csv_path + "' for writing");
    out.flush();
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= todo.size()) return;
      const Cell& c = cells[todo[j]];
      MetricRow row = run_cell(spec, c.method, c.size, c.seed);
      std::lock_guard<std::mutex> lock(mutex);
      if (out.is_open()) {
        out << format_metric_row(row) << '\n';
        out.flush();
      }
      results[todo[j]] = std::move(row);
    }
  };
  const int n_threads = std::min<int>(spec.workers, static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<MetricRow> rows;
  rows.reserve(results.size());
  for (auto& r : results) rows.push_back(std::move(*r));
  if (!csv_path.empty()) {
    out.close();
    write_metric_csv(csv_path, rows);
  }
  return rows;
}

// ---------------------------------------------------------------------------

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

void write_summary_json(const std::string& path, const std::vector<MetricRow>& rows) {
  using Key = std::tuple<std::string, std::string, int>;
  std::vector<Key> order;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::map<Key, int> failed;
  for (const auto& r : rows) {
    const Key k{r.task, r.method, r.train_size};
    if (!groups.count(k) && !failed.count(k)) order.push_back(k);
    if (r.ok()) {
      groups[k].first.push_back(r.nll);
      groups[k].second.push_back(r.rmse);
    } else {
      ++failed[k];
    }
  }
  nlohmann::ordered_json out;
  out["statistic"] = "median and interquartile range over seeds";
  out["groups"] = nlohmann::ordered_json::array();
  for (const auto& k : order) {
    const auto& [nlls, rmses] = groups[k];
    nlohmann::ordered_json g;
    g["task"] = std::get<0>(k);
    g["method"] = std::get<1>(k);
    g["train_size"] = std::get<2>(k);
    g["runs"] = nlls.size();
    g["failed"] = failed.count(k) ? failed[k] : 0;
    if (!nlls.empty()) {
      g["nll_median"] = median(nlls);
      g["nll_q25"] = quantile(nlls, 0.25);
      g["nll_q75"] = quantile(nlls, 0.75);
      g["rmse_median"] = median(rmses);
      g["rmse_q25"] = quantile(rmses, 0.25);
      g["rmse_q75"] = quantile(rmses, 0.75);
    }
    out["groups"].push_back(std::move(g));
  }
  std::ofstream os(path);
  if (!os) throw InvalidInputError("cannot open '" + path + "' for writing");
  os << out.dump(2) << '\n';
}

}  // namespace simpel
