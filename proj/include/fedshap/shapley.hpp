#pragma once

#include <functional>
#include <map>
#include <random>
#include <vector>

#include "fedshap/errors.hpp"

namespace fedshap {

/// Coalition utility U over subsets of the selected clients. eval must be
/// deterministic: the same subset always yields the identical value. The
/// empty and grand values are cached by the caller (in the federated
/// instantiation U(S) is the negative validation loss of the subset's
/// weighted model average, and U of the empty set is the utility of the
/// current server model).
struct CoalitionUtility {
  std::function<double(const std::vector<int>&)> eval;
  double empty_value = 0.0;  // U of the empty coalition
  double grand_value = 0.0;  // U of the full selected set
};

/// Per-round Shapley estimates plus approximation diagnostics.
struct SvReport {
  std::map<int, double> round_sv;       // keys exactly the selected set
  bool truncated_between_rounds = false;
  long permutations_used = 0;
  long utility_evals = 0;
};

struct GtgConfig {
  double epsilon = 1e-4;
  long max_iters = 0;          // sampling-round cap; 0 resolves to 50 * |S|
  int convergence_window = 5;
  double convergence_tol = 0;  // <= 0 resolves to epsilon
  /// Enumerate every pivot permutation instead of sampling (M <= 8); runs
  /// exactly (M-1)! sampling rounds with no convergence break, which makes
  /// the running averages equal the exact Shapley values when no truncation
  /// fires.
  bool exhaustive = false;
};

void validate(const GtgConfig& cfg);

/// Exact Shapley values by full subset enumeration; M <= 20.
std::map<int, double> exact_shapley(const CoalitionUtility& utility,
                                    const std::vector<int>& players);

/// Truncated Monte Carlo Shapley estimator. Skips the whole round when the
/// grand/empty utility gap is below epsilon, freezes prefix utilities once
/// the remaining gap drops below epsilon, and averages marginals over
/// sampled pivot permutations until the running means settle or the
/// iteration cap is reached.
SvReport gtg_shapley(const CoalitionUtility& utility, const std::vector<int>& players,
                     const GtgConfig& cfg, std::mt19937_64& rng);

enum class SvMode { mean, exponential };

/// Running per-client valuation across rounds. Selection counts are
/// incremented when a client is selected; round values are folded in with
/// either arithmetic-mean or exponential averaging. Clients never selected
/// have no defined value.
class CumulativeSv {
public:
  CumulativeSv(int num_clients, SvMode mode, double exp_alpha = 0.5);

  void record_selection(int client);
  void apply_round(const SvReport& report);

  bool initialized(int client) const;
  double value(int client) const;
  long selection_count(int client) const;
  long total_selections() const;
  int num_clients() const { return static_cast<int>(count_.size()); }
  SvMode mode() const { return mode_; }
  double exp_alpha() const { return exp_alpha_; }

private:
  void check_client(int client) const;

  SvMode mode_;
  double exp_alpha_;
  std::vector<double> value_;
  std::vector<long> count_;
  std::vector<char> observed_;
};

/// Functional wrapper over CumulativeSv::apply_round.
CumulativeSv update_cumulative(CumulativeSv cumulative, const SvReport& report);

}  // namespace fedshap
