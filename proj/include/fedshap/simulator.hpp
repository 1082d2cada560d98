#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedshap/data.hpp"
#include "fedshap/selection.hpp"
#include "fedshap/shapley.hpp"
#include "fedshap/train.hpp"

namespace fedshap {

enum class DataSource { synthetic, mnist, fmnist };

std::string to_string(DataSource source);
DataSource data_source_from_string(const std::string& name);

struct DataSpec {
  DataSource source = DataSource::synthetic;
  std::string data_dir;  // IDX file location; falls back to FEDSHAP_DATA_DIR
  // synthetic generator parameters
  int classes = 10;
  int dim = 20;
  long train_samples = 3000;
  long eval_samples = 2000;  // split in halves into validation / test
  double separation = 3.0;
};

struct SimConfig {
  int num_clients = 30;  // N
  int budget = 3;        // M
  int rounds = 60;       // T
  StrategyConfig strategy;
  TrainConfig train;
  PartitionSpec partition;
  PerturbationSpec perturb;
  GtgConfig gtg;
  SvMode sv_mode = SvMode::mean;
  double exp_alpha = 0.5;
  std::uint64_t seed = 1;
  DataSpec data;
  std::vector<int> hidden_dims;  // empty picks a default for the dataset
  /// Verification hook: substitute the exact Shapley oracle for the Monte
  /// Carlo estimator (requires budget <= 8).
  bool use_exact_sv = false;
  /// Fan client training out to a thread pool when > 1 (0 = hardware
  /// concurrency). Results are identical to serial execution.
  int threads = 1;
};

void validate(const SimConfig& cfg);

struct RoundRecord {
  int round = 0;
  std::vector<int> selected;
  double val_loss_before = 0.0;
  double val_loss_after = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  std::map<int, double> round_sv;
  long utility_evals = 0;
  double elapsed_ms = 0.0;
};

struct RunResult {
  std::vector<RoundRecord> records;
  ParamVector final_params;
  SimConfig config;
};

/// Aborted run: carries the failed round index and the records completed
/// before the failure.
class RunError : public Error {
public:
  RunError(int round, std::string message, std::vector<RoundRecord> partial)
      : Error("round " + std::to_string(round) + ": " + message),
        round_(round),
        partial_(std::move(partial)) {}

  int round() const { return round_; }
  const std::vector<RoundRecord>& partial_records() const { return partial_; }

private:
  int round_;
  std::vector<RoundRecord> partial_;
};

/// Runs the selection / local-training / aggregation / valuation loop for
/// exactly cfg.rounds rounds and records per-round metrics. Dispatches to
/// run_centralized for the centralized strategy.
RunResult run(const SimConfig& cfg);

/// Upper-bound baseline: one model trained on the union of all client data,
/// cfg.rounds rounds of cfg.train.epochs epochs each.
RunResult run_centralized(const SimConfig& cfg);

struct CompareRow {
  std::string label;
  std::vector<double> final_accuracies;  // one per seed
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

struct CompareSummary {
  std::vector<CompareRow> rows;
};

/// Runs every (config, seed) pair and reports mean and sample standard
/// deviation of the final test accuracy per config.
CompareSummary compare(const std::vector<SimConfig>& configs,
                       const std::vector<std::uint64_t>& seeds);

/// Paper-style "94.06 ± 0.19" accuracy cell (percent, two decimals).
std::string format_accuracy_cell(double mean, double stddev);

/// Renders the summary as an aligned text table.
std::string format_table(const CompareSummary& summary);

}  // namespace fedshap
