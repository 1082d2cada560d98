#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "fedshap/rng.hpp"
#include "fedshap/selection.hpp"

using namespace fedshap;

namespace {

struct Fixture {
  int n;
  int m;
  CumulativeSv cumulative;
  std::vector<long> counts;
  std::vector<int> rr_order;

  Fixture(int n_, int m_, SvMode mode = SvMode::mean)
      : n(n_), m(m_), cumulative(n_, mode) {
    counts.assign(static_cast<std::size_t>(n), 10);
    rr_order.resize(static_cast<std::size_t>(n));
    std::iota(rr_order.begin(), rr_order.end(), 0);
  }

  // N_k = times selections, all with round value v, so the average stays v
  void set_value(int client, double v, long times = 1) {
    SvReport r;
    r.round_sv = {{client, v}};
    for (long i = 0; i < times; ++i) {
      cumulative.record_selection(client);
      cumulative.apply_round(r);
    }
  }

  SelectionContext ctx(int round) const {
    SelectionContext c;
    c.round = round;
    c.num_clients = n;
    c.budget = m;
    c.cumulative = &cumulative;
    c.sample_counts = &counts;
    c.rr_order = &rr_order;
    return c;
  }
};

bool valid_selection(const std::vector<int>& s, int n, int m) {
  if (static_cast<int>(s.size()) != m) return false;
  std::set<int> dedup(s.begin(), s.end());
  if (dedup.size() != s.size()) return false;
  for (int k : s) {
    if (k < 0 || k >= n) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("rr phase length is the ceiling of N/M") {
  CHECK(rr_phase_length(300, 3) == 100);
  CHECK(rr_phase_length(5, 2) == 3);
  CHECK(rr_phase_length(4, 4) == 1);
  CHECK_THROWS_AS(rr_phase_length(0, 1), ConfigError);
}

TEST_CASE("round-robin walks consecutive blocks and wraps the last one") {
  Fixture f(5, 2);
  f.rr_order = {4, 0, 3, 1, 2};
  StrategyConfig cfg;
  cfg.kind = StrategyKind::greedy_fed;
  auto rng = make_rng(1);
  CHECK(select_clients(f.ctx(0), cfg, rng) == std::vector<int>{4, 0});
  CHECK(select_clients(f.ctx(1), cfg, rng) == std::vector<int>{3, 1});
  CHECK(select_clients(f.ctx(2), cfg, rng) == std::vector<int>{2, 4});
}

TEST_CASE("after the round-robin phase every client was selected at least once") {
  for (auto [n, m] : {std::pair{5, 2}, {7, 3}, {9, 4}, {6, 6}, {10, 1}}) {
    Fixture f(n, m);
    auto rng_perm = make_rng(17, {static_cast<std::uint64_t>(n)});
    std::shuffle(f.rr_order.begin(), f.rr_order.end(), rng_perm);
    StrategyConfig cfg;
    cfg.kind = StrategyKind::greedy_fed;
    std::set<int> seen;
    auto rng = make_rng(2);
    for (int t = 0; t < rr_phase_length(n, m); ++t) {
      const auto s = select_clients(f.ctx(t), cfg, rng);
      CHECK(valid_selection(s, n, m));
      seen.insert(s.begin(), s.end());
    }
    CHECK(static_cast<int>(seen.size()) == n);
  }
}

TEST_CASE("greedy phase returns the top-M by cumulative value") {
  Fixture f(3, 2);
  f.set_value(0, 0.3);
  f.set_value(1, 0.1);
  f.set_value(2, 0.5);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::greedy_fed;
  auto rng = make_rng(3);
  const auto s = select_clients(f.ctx(rr_phase_length(3, 2)), cfg, rng);
  CHECK(s == std::vector<int>{2, 0});
}

TEST_CASE("greedy ties break toward the lower client index") {
  Fixture f(4, 2);
  for (int k = 0; k < 4; ++k) f.set_value(k, 0.25);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::greedy_fed;
  auto rng = make_rng(4);
  const auto s = select_clients(f.ctx(2), cfg, rng);
  CHECK(s == std::vector<int>{0, 1});
}

TEST_CASE("greedy phase requires every client to be valued") {
  Fixture f(3, 2);
  f.set_value(0, 0.3);  // clients 1, 2 stay unvalued
  StrategyConfig cfg;
  cfg.kind = StrategyKind::greedy_fed;
  auto rng = make_rng(5);
  CHECK_THROWS_AS(select_clients(f.ctx(2), cfg, rng), LogicError);
}

TEST_CASE("ucb bonus lifts rarely selected clients") {
  Fixture f(3, 1);
  f.set_value(0, 0.50, 50);  // often selected, slightly better
  f.set_value(1, 0.49, 1);   // nearly as good, barely explored
  f.set_value(2, 0.10, 50);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::ucb;
  cfg.ucb_c = 0.1;
  auto rng = make_rng(6);
  const auto s = select_clients(f.ctx(5), cfg, rng);
  // bonus ~ c*sqrt(2 ln(101)/1) ≈ 0.30 dominates the 0.01 value gap
  CHECK(s == std::vector<int>{1});
}

TEST_CASE("positive scaling leaves greedy and co-scaled ucb choices unchanged") {
  for (double scale : {0.01, 3.0, 1000.0}) {
    Fixture base(6, 3);
    Fixture scaled(6, 3);
    auto rng_v = make_rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int k = 0; k < 6; ++k) {
      const double v = dist(rng_v);
      const long times = 1 + (k % 3);
      base.set_value(k, v, times);
      scaled.set_value(k, scale * v, times);
    }
    StrategyConfig greedy;
    greedy.kind = StrategyKind::greedy_fed;
    auto rng_a = make_rng(8);
    auto rng_b = make_rng(8);
    CHECK(select_clients(base.ctx(4), greedy, rng_a) ==
          select_clients(scaled.ctx(4), greedy, rng_b));

    StrategyConfig ucb_base;
    ucb_base.kind = StrategyKind::ucb;
    ucb_base.ucb_c = 0.2;
    StrategyConfig ucb_scaled = ucb_base;
    ucb_scaled.ucb_c = 0.2 * scale;
    auto rng_c = make_rng(9);
    auto rng_d = make_rng(9);
    CHECK(select_clients(base.ctx(4), ucb_base, rng_c) ==
          select_clients(scaled.ctx(4), ucb_scaled, rng_d));
  }
}

TEST_CASE("fedavg inclusion frequency is M/N within three standard errors") {
  const int n = 12, m = 3, rounds = 10000;
  Fixture f(n, m);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::fedavg;
  std::vector<int> hits(static_cast<std::size_t>(n), 0);
  auto rng = make_rng(11);
  for (int t = 0; t < rounds; ++t) {
    const auto s = select_clients(f.ctx(t), cfg, rng);
    CHECK(valid_selection(s, n, m));
    for (int k : s) hits[static_cast<std::size_t>(k)] += 1;
  }
  const double p = static_cast<double>(m) / n;
  const double se = std::sqrt(p * (1.0 - p) / rounds);
  for (int k = 0; k < n; ++k) {
    const double freq = static_cast<double>(hits[static_cast<std::size_t>(k)]) / rounds;
    CHECK(std::abs(freq - p) < 3.0 * se);
  }
}

TEST_CASE("s_fedavg with equal values selects uniformly (chi-square)") {
  const int n = 10, m = 2, rounds = 10000;
  Fixture f(n, m, SvMode::exponential);
  for (int k = 0; k < n; ++k) f.set_value(k, 0.5);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::s_fedavg;
  cfg.softmax_beta = 10.0;
  std::vector<int> hits(static_cast<std::size_t>(n), 0);
  auto rng = make_rng(11);
  for (int t = 0; t < rounds; ++t) {
    for (int k : select_clients(f.ctx(t), cfg, rng)) {
      hits[static_cast<std::size_t>(k)] += 1;
    }
  }
  const double expected = static_cast<double>(m) * rounds / n;
  double chi2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double d = hits[static_cast<std::size_t>(k)] - expected;
    chi2 += d * d / expected;
  }
  // chi-square critical value, df = 9, significance 0.01
  CHECK(chi2 < 21.666);
}

TEST_CASE("s_fedavg values unobserved clients at the observed mean") {
  const int n = 6, m = 2, rounds = 20000;
  Fixture f(n, m, SvMode::exponential);
  // three observed clients share one value; the other three are unobserved
  for (int k = 0; k < 3; ++k) f.set_value(k, 0.8);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::s_fedavg;
  std::vector<int> hits(static_cast<std::size_t>(n), 0);
  auto rng = make_rng(12);
  for (int t = 0; t < rounds; ++t) {
    for (int k : select_clients(f.ctx(t), cfg, rng)) {
      hits[static_cast<std::size_t>(k)] += 1;
    }
  }
  // every client then sits at the same softmax weight
  const double expected = static_cast<double>(m) * rounds / n;
  for (int k = 0; k < n; ++k) {
    CHECK(std::abs(hits[static_cast<std::size_t>(k)] - expected) <
          5.0 * std::sqrt(expected));
  }
}

TEST_CASE("power_of_choice picks the highest local losses from the queried set") {
  Fixture f(8, 2);
  SelectionContext ctx = f.ctx(0);
  ctx.local_loss_query = [](int k) { return static_cast<double>(k); };
  StrategyConfig cfg;
  cfg.kind = StrategyKind::power_of_choice;
  cfg.poc_query_size = 0;  // query everyone on round 0
  auto rng = make_rng(13);
  const auto s = select_clients(ctx, cfg, rng);
  // with the full candidate set, the two largest losses win
  CHECK(s == std::vector<int>{7, 6});
}

TEST_CASE("power_of_choice query set decays but never drops below M") {
  Fixture f(8, 3);
  int max_seen = 0;
  for (int t = 0; t < 40; ++t) {
    SelectionContext ctx = f.ctx(t);
    std::set<int> queried;
    ctx.local_loss_query = [&queried](int k) {
      queried.insert(k);
      return 1.0;
    };
    StrategyConfig cfg;
    cfg.kind = StrategyKind::power_of_choice;
    cfg.poc_decay = 0.9;
    auto rng = make_rng(14, {static_cast<std::uint64_t>(t)});
    const auto s = select_clients(ctx, cfg, rng);
    CHECK(valid_selection(s, 8, 3));
    CHECK(queried.size() >= 3);
    max_seen = std::max(max_seen, static_cast<int>(queried.size()));
  }
  CHECK(max_seen == 8);  // round 0 queries all clients
}

TEST_CASE("power_of_choice without a loss query is a configuration error") {
  Fixture f(4, 2);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::power_of_choice;
  auto rng = make_rng(15);
  CHECK_THROWS_AS(select_clients(f.ctx(0), cfg, rng), ConfigError);
}

TEST_CASE("centralized performs no selection") {
  Fixture f(4, 2);
  StrategyConfig cfg;
  cfg.kind = StrategyKind::centralized;
  auto rng = make_rng(16);
  CHECK_THROWS_AS(select_clients(f.ctx(0), cfg, rng), ConfigError);
}

TEST_CASE("every strategy yields valid selections and is bit-reproducible") {
  const int n = 9, m = 3;
  for (StrategyKind kind : {StrategyKind::greedy_fed, StrategyKind::ucb,
                            StrategyKind::s_fedavg, StrategyKind::fedavg,
                            StrategyKind::power_of_choice}) {
    Fixture f(n, m, kind == StrategyKind::s_fedavg ? SvMode::exponential
                                                   : SvMode::mean);
    auto rng_v = make_rng(18);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int k = 0; k < n; ++k) f.set_value(k, dist(rng_v), 1 + k % 2);
    for (int t : {0, 1, 3, 5, 11}) {
      SelectionContext ctx = f.ctx(t);
      ctx.local_loss_query = [](int k) { return 1.0 / (1.0 + k); };
      StrategyConfig cfg;
      cfg.kind = kind;
      auto rng_a = make_rng(19, {static_cast<std::uint64_t>(t)});
      auto rng_b = make_rng(19, {static_cast<std::uint64_t>(t)});
      const auto a = select_clients(ctx, cfg, rng_a);
      const auto b = select_clients(ctx, cfg, rng_b);
      CHECK(valid_selection(a, n, m));
      CHECK(a == b);
    }
  }
}

TEST_CASE("strategy names round-trip") {
  for (StrategyKind kind : {StrategyKind::greedy_fed, StrategyKind::ucb,
                            StrategyKind::s_fedavg, StrategyKind::fedavg,
                            StrategyKind::power_of_choice, StrategyKind::centralized}) {
    CHECK(strategy_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(strategy_from_string("nonsense"), ConfigError);
}

}  // TEST_SUITE
