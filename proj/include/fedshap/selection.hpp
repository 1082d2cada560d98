#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fedshap/shapley.hpp"

namespace fedshap {

enum class StrategyKind {
  greedy_fed,
  ucb,
  s_fedavg,
  fedavg,
  power_of_choice,
  centralized,
};

std::string to_string(StrategyKind kind);
StrategyKind strategy_from_string(const std::string& name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::greedy_fed;
  double ucb_c = 0.1;          // exploration weight on the confidence bonus
  double softmax_beta = 10.0;  // S-FedAvg temperature
  int poc_query_size = 0;      // d0; 0 means query all clients
  double poc_decay = 0.9;      // exponential decay of the query-set size
};

void validate(const StrategyConfig& cfg, int num_clients, int budget);

/// Everything a strategy may consult when picking this round's clients.
struct SelectionContext {
  int round = 0;        // t
  int num_clients = 0;  // N
  int budget = 0;       // M
  const CumulativeSv* cumulative = nullptr;
  const std::vector<long>* sample_counts = nullptr;  // n_k per client
  const std::vector<int>* rr_order = nullptr;  // fixed random permutation of [N]
  /// Loss of the current server model on a client's shard (Power-Of-Choice).
  std::function<double(int)> local_loss_query;
};

/// ceil(N / M): rounds needed for the round-robin phase to touch every client.
int rr_phase_length(int num_clients, int budget);

/// Picks this round's M distinct clients. greedy_fed and ucb spend the first
/// ceil(N/M) rounds walking consecutive blocks of rr_order (the last block
/// wraps), then rank clients by cumulative value; s_fedavg samples through a
/// softmax over the value vector; fedavg samples uniformly; power_of_choice
/// queries a shrinking candidate set for local loss. Ties break toward the
/// lower client index.
std::vector<int> select_clients(const SelectionContext& ctx, const StrategyConfig& cfg,
                                std::mt19937_64& rng);

}  // namespace fedshap
