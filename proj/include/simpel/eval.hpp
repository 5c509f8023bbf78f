#pragma once

#include <functional>
#include <string>
#include <vector>

#include "simpel/ensemble.hpp"
#include "simpel/tasks.hpp"

namespace simpel {

/// m training points: inputs uniform over the training box, targets from
/// the high-fidelity system plus N(0, sigma^2) noise.
Dataset make_train_set(const TaskConfig& task, int size, Rng& rng);

/// The fixed test set: a grid for one-dimensional inputs, otherwise a
/// uniform sample from the task's own test seed. Targets are noisy.
Dataset make_test_set(const TaskConfig& task);

struct TrainTest {
  Dataset train;
  Dataset test;
};

TrainTest make_dataset(const TaskConfig& task, int size, Rng& rng);

/// Mean over test points and output dimensions of -ln N(y | mean, var).
double nll(const Matrix& mean, const Matrix& variance, const Matrix& y);
double nll(const Prediction& prediction, const Matrix& y);
double rmse(const Matrix& mean, const Matrix& y);

struct ExperimentSpec {
  TaskConfig task;
  std::vector<Method> methods;
  std::vector<int> train_sizes;
  std::vector<std::uint64_t> seeds;
  MethodConfig method_config;
  std::uint64_t master_seed = 0;
  int workers = 1;
  bool record_timing = true;    // false writes 0 wall times (byte-stable output)

  void validate() const;
};

struct MetricRow {
  std::string task;
  std::string method;
  int train_size = 0;
  std::uint64_t seed = 0;
  double nll = 0.0;
  double rmse = 0.0;
  double wall_time_s = 0.0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

inline constexpr const char* kMetricHeader = "task,method,train_size,seed,nll,rmse,wall_time_s,status";

/// Seed of the training data for one (seed, size) cell; shared by all
/// methods so comparisons are paired.
std::uint64_t data_seed(std::uint64_t master, std::uint64_t seed, int train_size);
std::uint64_t model_seed(std::uint64_t master, std::uint64_t seed, int train_size, Method method);

/// Trains and evaluates one cell. Failures are reported in the status field.
MetricRow run_cell(const ExperimentSpec& spec, Method method, int train_size, std::uint64_t seed);

/// Full cross product method x size x seed on a worker pool. With an output
/// path, rows are appended as they finish; with resume, rows already in the
/// file are kept and skipped. The file is finally rewritten in canonical
/// order (method, size, seed as listed in the spec).
std::vector<MetricRow> run_learning_curve(const ExperimentSpec& spec,
                                          const std::string& csv_path = "", bool resume = false);

void write_metric_csv(const std::string& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metric_csv(const std::string& path);
std::string format_metric_row(const MetricRow& row);

/// Median and interquartile range per (task, method, size) as JSON.
void write_summary_json(const std::string& path, const std::vector<MetricRow>& rows);

double median(std::vector<double> values);
double quantile(std::vector<double> values, double q);

}  // namespace simpel
