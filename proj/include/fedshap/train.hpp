#pragma once

#include <optional>
#include <random>
#include <vector>

#include "fedshap/mlp.hpp"

namespace fedshap {

/// Client-side optimization settings: E epochs of B mini-batches each, SGD
/// with learning rate and momentum, optional proximal pull toward the server
/// model.
struct TrainConfig {
  int epochs = 5;              // E
  int batches_per_epoch = 5;   // B
  double learning_rate = 0.01; // eta
  double momentum = 0.5;       // gamma, in [0, 1)
  double prox_mu = 0.0;        // mu >= 0
};

void validate(const TrainConfig& cfg);

/// SGD-with-momentum loop shared by client_update and the centralized
/// baseline. Starts from `start`, pulls toward `prox_anchor` when
/// cfg.prox_mu > 0, and runs `epochs` epochs of cfg.batches_per_epoch
/// mini-batches. Each epoch reshuffles the shard and splits it into equal
/// contiguous batches (the last batch absorbs the remainder); shards smaller
/// than B fall back to single-sample batches. The momentum buffer starts at
/// zero and persists across epochs within the call.
ParamVector run_local_sgd(const MlpModel& model, const ParamVector& start,
                          const ParamVector& prox_anchor, const Dataset& data,
                          const TrainConfig& cfg, int epochs, std::mt19937_64& rng);

/// One round of local training from the current server parameters
/// (model.params). epochs_override caps the epoch count for stragglers and
/// must not exceed cfg.epochs. The server parameters are left untouched.
ParamVector client_update(const MlpModel& model, const Dataset& data,
                          const TrainConfig& cfg,
                          std::optional<int> epochs_override, std::mt19937_64& rng);

/// One client's transmitted update together with its aggregation weight.
struct WeightedParams {
  int client_id = 0;
  long sample_count = 0;  // n_k
  ParamVector params;
};

/// Dataset-size weighted average sum_k (n_k / sum_j n_j) w_k. Entries are
/// summed in ascending client_id order so the result is independent of the
/// caller's ordering, bit for bit.
ParamVector model_average(const std::vector<WeightedParams>& entries);

}  // namespace fedshap
