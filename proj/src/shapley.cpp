#include "fedshap/shapley.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <sstream>
#include <unordered_set>

namespace fedshap {

namespace {

std::string subset_to_string(const std::vector<int>& subset) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i) os << ",";
    os << subset[i];
  }
  os << "}";
  return os.str();
}

void check_players(const std::vector<int>& players) {
  if (players.empty()) throw InputError("shapley: empty player set");
  std::unordered_set<int> seen;
  for (int p : players) {
    if (!seen.insert(p).second) {
      throw InputError("shapley: duplicate player " + std::to_string(p));
    }
  }
}

double call_eval(const CoalitionUtility& utility, const std::vector<int>& subset,
                 long& eval_count) {
  try {
    ++eval_count;
    return utility.eval(subset);
  } catch (const std::exception& e) {
    throw EvalError("utility evaluation failed for subset " +
                    subset_to_string(subset) + ": " + e.what());
  }
}

long factorial(int n) {
  long f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

void validate(const GtgConfig& cfg) {
  if (cfg.epsilon <= 0.0) throw ConfigError("gtg: epsilon must be > 0");
  if (cfg.max_iters < 0) throw ConfigError("gtg: max_iters must be >= 0");
  if (cfg.convergence_window < 1) throw ConfigError("gtg: convergence_window must be >= 1");
}

std::map<int, double> exact_shapley(const CoalitionUtility& utility,
                                    const std::vector<int>& players) {
  check_players(players);
  const int m = static_cast<int>(players.size());
  if (m > 20) {
    throw CapacityError("exact_shapley: " + std::to_string(m) +
                        " players exceeds the 2^M enumeration bound of 20; "
                        "use gtg_shapley instead");
  }

  const std::uint32_t full = (m == 32) ? 0xffffffffu : ((1u << m) - 1u);
  std::vector<double> value(static_cast<std::size_t>(full) + 1, 0.0);
  long evals = 0;
  std::vector<int> subset;
  subset.reserve(players.size());
  for (std::uint32_t mask = 0; mask <= full; ++mask) {
    if (mask == 0) {
      value[mask] = utility.empty_value;
    } else if (mask == full) {
      value[mask] = utility.grand_value;
    } else {
      subset.clear();
      for (int i = 0; i < m; ++i) {
        if (mask & (1u << i)) subset.push_back(players[static_cast<std::size_t>(i)]);
      }
      value[mask] = call_eval(utility, subset, evals);
    }
  }

  // C(M-1, s) for s = 0..M-1
  std::vector<double> choose(static_cast<std::size_t>(m), 1.0);
  for (int s = 1; s < m; ++s) {
    choose[static_cast<std::size_t>(s)] =
        choose[static_cast<std::size_t>(s - 1)] * static_cast<double>(m - s) /
        static_cast<double>(s);
  }

  std::map<int, double> sv;
  for (int i = 0; i < m; ++i) {
    const std::uint32_t bit = 1u << i;
    double sum = 0.0;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      if (mask & bit) continue;
      const int s = std::popcount(mask);
      sum += (value[mask | bit] - value[mask]) / choose[static_cast<std::size_t>(s)];
    }
    sv[players[static_cast<std::size_t>(i)]] = sum / static_cast<double>(m);
  }
  return sv;
}

SvReport gtg_shapley(const CoalitionUtility& utility, const std::vector<int>& players,
                     const GtgConfig& cfg, std::mt19937_64& rng) {
  check_players(players);
  validate(cfg);
  const int m = static_cast<int>(players.size());
  if (cfg.exhaustive && m > 8) {
    throw CapacityError("gtg_shapley: exhaustive enumeration limited to 8 players");
  }

  SvReport report;
  const double v_empty = utility.empty_value;
  const double v_grand = utility.grand_value;

  // between-round truncation: the whole round moved the utility too little
  if (std::abs(v_grand - v_empty) < cfg.epsilon) {
    for (int p : players) report.round_sv[p] = 0.0;
    report.truncated_between_rounds = true;
    return report;
  }

  const double tol = cfg.convergence_tol > 0.0 ? cfg.convergence_tol : cfg.epsilon;
  long rounds = cfg.max_iters > 0 ? cfg.max_iters : 50L * m;
  if (cfg.exhaustive) rounds = factorial(m - 1);

  std::vector<double> marginal_sum(players.size(), 0.0);
  std::vector<long> marginal_count(players.size(), 0);
  std::map<int, std::size_t> slot_of;
  for (std::size_t i = 0; i < players.size(); ++i) slot_of[players[i]] = i;

  // per-pivot permutation state for exhaustive enumeration
  std::vector<std::vector<int>> exhaustive_rest;
  if (cfg.exhaustive) {
    for (int i = 0; i < m; ++i) {
      std::vector<int> rest;
      for (int j = 0; j < m; ++j) {
        if (j != i) rest.push_back(players[static_cast<std::size_t>(j)]);
      }
      std::sort(rest.begin(), rest.end());
      exhaustive_rest.push_back(std::move(rest));
    }
  }

  std::deque<std::vector<double>> mean_history;
  std::vector<int> prefix;
  std::vector<int> rest;
  prefix.reserve(players.size());
  rest.reserve(players.size());

  for (long tau = 1; tau <= rounds; ++tau) {
    for (int pivot_idx = 0; pivot_idx < m; ++pivot_idx) {
      if (cfg.exhaustive) {
        rest = exhaustive_rest[static_cast<std::size_t>(pivot_idx)];
      } else {
        rest.clear();
        for (int j = 0; j < m; ++j) {
          if (j != pivot_idx) rest.push_back(players[static_cast<std::size_t>(j)]);
        }
        std::shuffle(rest.begin(), rest.end(), rng);
      }

      prefix.clear();
      double v_prev = v_empty;
      for (int pos = 0; pos < m; ++pos) {
        const int client =
            pos == 0 ? players[static_cast<std::size_t>(pivot_idx)]
                     : rest[static_cast<std::size_t>(pos - 1)];
        prefix.push_back(client);
        double v_next;
        if (std::abs(v_grand - v_prev) < cfg.epsilon) {
          v_next = v_prev;  // within-round truncation: remaining marginals are zero
        } else if (pos == m - 1) {
          v_next = v_grand;
        } else {
          v_next = call_eval(utility, prefix, report.utility_evals);
        }
        const std::size_t k = slot_of[client];
        marginal_sum[k] += v_next - v_prev;
        marginal_count[k] += 1;
        v_prev = v_next;
      }
      report.permutations_used += 1;

      if (cfg.exhaustive) {
        std::next_permutation(exhaustive_rest[static_cast<std::size_t>(pivot_idx)].begin(),
                              exhaustive_rest[static_cast<std::size_t>(pivot_idx)].end());
      }
    }

    std::vector<double> means(players.size());
    for (std::size_t k = 0; k < players.size(); ++k) {
      means[k] = marginal_sum[k] / static_cast<double>(marginal_count[k]);
    }
    if (!cfg.exhaustive) {
      mean_history.push_back(means);
      if (mean_history.size() >
          static_cast<std::size_t>(cfg.convergence_window) + 1) {
        mean_history.pop_front();
      }
      if (mean_history.size() ==
          static_cast<std::size_t>(cfg.convergence_window) + 1) {
        bool converged = true;
        for (std::size_t h = 0; h + 1 < mean_history.size() && converged; ++h) {
          for (std::size_t k = 0; k < players.size(); ++k) {
            if (std::abs(means[k] - mean_history[h][k]) >= tol) {
              converged = false;
              break;
            }
          }
        }
        if (converged) break;
      }
    }
  }

  for (std::size_t k = 0; k < players.size(); ++k) {
    report.round_sv[players[k]] =
        marginal_sum[k] / static_cast<double>(marginal_count[k]);
  }
  return report;
}

CumulativeSv::CumulativeSv(int num_clients, SvMode mode, double exp_alpha)
    : mode_(mode), exp_alpha_(exp_alpha) {
  if (num_clients <= 0) throw ConfigError("cumulative sv: num_clients must be positive");
  if (exp_alpha < 0.0 || exp_alpha >= 1.0) {
    throw ConfigError("cumulative sv: exponential alpha must lie in [0, 1)");
  }
  value_.assign(static_cast<std::size_t>(num_clients), 0.0);
  count_.assign(static_cast<std::size_t>(num_clients), 0);
  observed_.assign(static_cast<std::size_t>(num_clients), 0);
}

void CumulativeSv::check_client(int client) const {
  if (client < 0 || client >= num_clients()) {
    throw LogicError("cumulative sv: client " + std::to_string(client) +
                     " out of range");
  }
}

void CumulativeSv::record_selection(int client) {
  check_client(client);
  count_[static_cast<std::size_t>(client)] += 1;
}

void CumulativeSv::apply_round(const SvReport& report) {
  for (const auto& [client, sv] : report.round_sv) {
    check_client(client);
    const auto k = static_cast<std::size_t>(client);
    if (count_[k] == 0) {
      throw LogicError("cumulative sv: round value for client " +
                       std::to_string(client) + " with no recorded selection");
    }
    if (mode_ == SvMode::mean) {
      const double n = static_cast<double>(count_[k]);
      value_[k] = ((n - 1.0) * value_[k] + sv) / n;
    } else {
      value_[k] = observed_[k] ? exp_alpha_ * value_[k] + (1.0 - exp_alpha_) * sv : sv;
    }
    observed_[k] = 1;
  }
}

bool CumulativeSv::initialized(int client) const {
  check_client(client);
  return observed_[static_cast<std::size_t>(client)] != 0;
}

double CumulativeSv::value(int client) const {
  check_client(client);
  if (!observed_[static_cast<std::size_t>(client)]) {
    throw LogicError("cumulative sv: client " + std::to_string(client) +
                     " has no recorded value");
  }
  return value_[static_cast<std::size_t>(client)];
}

long CumulativeSv::selection_count(int client) const {
  check_client(client);
  return count_[static_cast<std::size_t>(client)];
}

long CumulativeSv::total_selections() const {
  long total = 0;
  for (long c : count_) total += c;
  return total;
}

CumulativeSv update_cumulative(CumulativeSv cumulative, const SvReport& report) {
  cumulative.apply_round(report);
  return cumulative;
}

}  // namespace fedshap
