#include "fedshap/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedshap {

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::greedy_fed: return "greedy_fed";
    case StrategyKind::ucb: return "ucb";
    case StrategyKind::s_fedavg: return "s_fedavg";
    case StrategyKind::fedavg: return "fedavg";
    case StrategyKind::power_of_choice: return "power_of_choice";
    case StrategyKind::centralized: return "centralized";
  }
  throw LogicError("unknown strategy kind");
}

StrategyKind strategy_from_string(const std::string& name) {
  if (name == "greedy_fed") return StrategyKind::greedy_fed;
  if (name == "ucb") return StrategyKind::ucb;
  if (name == "s_fedavg") return StrategyKind::s_fedavg;
  if (name == "fedavg") return StrategyKind::fedavg;
  if (name == "power_of_choice") return StrategyKind::power_of_choice;
  if (name == "centralized") return StrategyKind::centralized;
  throw ConfigError("unknown strategy: " + name);
}

void validate(const StrategyConfig& cfg, int num_clients, int budget) {
  if (cfg.ucb_c <= 0.0 && cfg.kind == StrategyKind::ucb) {
    throw ConfigError("ucb exploration constant must be > 0");
  }
  if (cfg.softmax_beta <= 0.0 && cfg.kind == StrategyKind::s_fedavg) {
    throw ConfigError("s_fedavg temperature must be > 0");
  }
  if (cfg.kind == StrategyKind::power_of_choice) {
    if (cfg.poc_decay <= 0.0 || cfg.poc_decay > 1.0) {
      throw ConfigError("power_of_choice decay must lie in (0, 1]");
    }
    if (cfg.poc_query_size != 0 &&
        (cfg.poc_query_size < budget || cfg.poc_query_size > num_clients)) {
      throw ConfigError("power_of_choice query size must lie in [budget, clients]");
    }
  }
}

int rr_phase_length(int num_clients, int budget) {
  if (num_clients < 1 || budget < 1) {
    throw ConfigError("rr_phase_length: clients and budget must be >= 1");
  }
  return (num_clients + budget - 1) / budget;
}

namespace {

void check_context(const SelectionContext& ctx) {
  if (ctx.budget < 1 || ctx.budget > ctx.num_clients) {
    throw ConfigError("selection: budget must lie in [1, num_clients]");
  }
}

// Top-M client ids by score, ties toward the lower index, in descending
// score order.
std::vector<int> top_by_score(const std::vector<double>& score, int budget) {
  std::vector<int> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (score[static_cast<std::size_t>(a)] != score[static_cast<std::size_t>(b)]) {
      return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  order.resize(static_cast<std::size_t>(budget));
  return order;
}

std::vector<int> round_robin_block(const SelectionContext& ctx) {
  if (ctx.rr_order == nullptr ||
      ctx.rr_order->size() != static_cast<std::size_t>(ctx.num_clients)) {
    throw ConfigError("selection: round-robin phase requires an rr_order permutation");
  }
  std::vector<int> selected;
  selected.reserve(static_cast<std::size_t>(ctx.budget));
  for (int i = 0; i < ctx.budget; ++i) {
    const auto pos = static_cast<std::size_t>(
        (static_cast<long>(ctx.round) * ctx.budget + i) % ctx.num_clients);
    selected.push_back((*ctx.rr_order)[pos]);
  }
  return selected;
}

std::vector<double> cumulative_values(const SelectionContext& ctx) {
  if (ctx.cumulative == nullptr) {
    throw ConfigError("selection: strategy requires cumulative values");
  }
  std::vector<double> values(static_cast<std::size_t>(ctx.num_clients));
  for (int k = 0; k < ctx.num_clients; ++k) {
    if (!ctx.cumulative->initialized(k)) {
      throw LogicError("selection: client " + std::to_string(k) +
                       " has no value in the greedy phase");
    }
    values[static_cast<std::size_t>(k)] = ctx.cumulative->value(k);
  }
  return values;
}

// Weighted sampling without replacement; weights need not be normalized.
std::vector<int> sample_without_replacement(std::vector<double> weights, int draws,
                                            std::mt19937_64& rng) {
  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(draws));
  for (int d = 0; d < draws; ++d) {
    std::discrete_distribution<int> dist(weights.begin(), weights.end());
    const int k = dist(rng);
    picked.push_back(k);
    weights[static_cast<std::size_t>(k)] = 0.0;
  }
  return picked;
}

}  // namespace

std::vector<int> select_clients(const SelectionContext& ctx, const StrategyConfig& cfg,
                                std::mt19937_64& rng) {
  check_context(ctx);
  validate(cfg, ctx.num_clients, ctx.budget);
  const int n = ctx.num_clients;
  const int m = ctx.budget;

  switch (cfg.kind) {
    case StrategyKind::centralized:
      throw ConfigError("centralized training performs no per-round selection");

    case StrategyKind::fedavg: {
      std::vector<int> pool(static_cast<std::size_t>(n));
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < m; ++i) {
        std::uniform_int_distribution<int> dist(i, n - 1);
        std::swap(pool[static_cast<std::size_t>(i)],
                  pool[static_cast<std::size_t>(dist(rng))]);
      }
      pool.resize(static_cast<std::size_t>(m));
      return pool;
    }

    case StrategyKind::s_fedavg: {
      if (ctx.cumulative == nullptr) {
        throw ConfigError("s_fedavg requires cumulative values");
      }
      // value vector: observed clients keep their averaged value,
      // unobserved ones sit at the observed mean
      std::vector<double> values(static_cast<std::size_t>(n), 0.0);
      double observed_sum = 0.0;
      int observed_count = 0;
      for (int k = 0; k < n; ++k) {
        if (ctx.cumulative->initialized(k)) {
          values[static_cast<std::size_t>(k)] = ctx.cumulative->value(k);
          observed_sum += ctx.cumulative->value(k);
          ++observed_count;
        }
      }
      const double fill = observed_count > 0 ? observed_sum / observed_count : 0.0;
      for (int k = 0; k < n; ++k) {
        if (!ctx.cumulative->initialized(k)) values[static_cast<std::size_t>(k)] = fill;
      }
      double max_v = values[0];
      for (double v : values) max_v = std::max(max_v, v);
      std::vector<double> probs(values.size());
      for (std::size_t k = 0; k < values.size(); ++k) {
        probs[k] = std::exp(cfg.softmax_beta * (values[k] - max_v));
      }
      return sample_without_replacement(std::move(probs), m, rng);
    }

    case StrategyKind::power_of_choice: {
      if (!ctx.local_loss_query) {
        throw ConfigError("power_of_choice requires a local_loss_query");
      }
      if (ctx.sample_counts == nullptr ||
          ctx.sample_counts->size() != static_cast<std::size_t>(n)) {
        throw ConfigError("power_of_choice requires per-client sample counts");
      }
      const int d0 = cfg.poc_query_size > 0 ? cfg.poc_query_size : n;
      const double shrunk = static_cast<double>(d0) * std::pow(cfg.poc_decay, ctx.round);
      const int d_t = std::min(n, std::max(m, static_cast<int>(std::lround(shrunk))));
      std::vector<double> weights(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) {
        weights[static_cast<std::size_t>(k)] =
            static_cast<double>((*ctx.sample_counts)[static_cast<std::size_t>(k)]);
      }
      const std::vector<int> candidates =
          sample_without_replacement(std::move(weights), d_t, rng);
      std::vector<std::pair<double, int>> ranked;
      ranked.reserve(candidates.size());
      for (int k : candidates) {
        ranked.emplace_back(ctx.local_loss_query(k), k);
      }
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      std::vector<int> selected;
      selected.reserve(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) selected.push_back(ranked[static_cast<std::size_t>(i)].second);
      return selected;
    }

    case StrategyKind::greedy_fed:
    case StrategyKind::ucb: {
      if (ctx.round < rr_phase_length(n, m)) {
        return round_robin_block(ctx);
      }
      std::vector<double> score = cumulative_values(ctx);
      if (cfg.kind == StrategyKind::ucb) {
        const double total = static_cast<double>(ctx.cumulative->total_selections());
        for (int k = 0; k < n; ++k) {
          const double n_k =
              static_cast<double>(ctx.cumulative->selection_count(k));
          if (n_k <= 0) {
            throw LogicError("ucb: client " + std::to_string(k) +
                             " has no selections in the greedy phase");
          }
          score[static_cast<std::size_t>(k)] +=
              cfg.ucb_c * std::sqrt(2.0 * std::log(total) / n_k);
        }
      }
      return top_by_score(score, m);
    }
  }
  throw LogicError("unhandled strategy kind");
}

}  // namespace fedshap
