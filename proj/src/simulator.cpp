#include "fedshap/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <numeric>
#include <sstream>

#include "fedshap/rng.hpp"

namespace fedshap {

std::string to_string(DataSource source) {
  switch (source) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::mnist: return "mnist";
    case DataSource::fmnist: return "fmnist";
  }
  throw LogicError("unknown data source");
}

DataSource data_source_from_string(const std::string& name) {
  if (name == "synthetic") return DataSource::synthetic;
  if (name == "mnist") return DataSource::mnist;
  if (name == "fmnist") return DataSource::fmnist;
  throw ConfigError("unknown dataset: " + name);
}

namespace {

// rng stream tags; every randomized stage draws from its own derived
// generator so results are independent of execution order
enum Stream : std::uint64_t {
  kTrainData = 1,
  kEvalData = 2,
  kEvalSplit = 3,
  kSizes = 4,
  kPartition = 5,
  kPerturb = 6,
  kInit = 7,
  kRrOrder = 8,
  kSelect = 9,
  kClientTrain = 10,
  kClientNoise = 11,
  kStragglerEpochs = 12,
  kGtg = 13,
};

struct PreparedData {
  Dataset train;
  Dataset validation;
  Dataset test;
};

std::string resolve_idx_file(const DataSpec& spec, const std::string& name) {
  namespace fs = std::filesystem;
  std::vector<std::string> bases;
  if (!spec.data_dir.empty()) bases.push_back(spec.data_dir);
  if (const char* env = std::getenv("FEDSHAP_DATA_DIR")) bases.emplace_back(env);
  std::vector<std::string> tried;
  for (const auto& base : bases) {
    for (const auto& sub : {std::string{}, "/" + to_string(spec.source)}) {
      for (const auto& ext : {std::string{}, std::string{".gz"}}) {
        const std::string candidate = base + sub + "/" + name + ext;
        if (fs::exists(candidate)) return candidate;
        tried.push_back(candidate);
      }
    }
  }
  std::string msg = "cannot locate " + name + " for dataset " + to_string(spec.source);
  if (tried.empty()) {
    msg += "; set --data-dir or FEDSHAP_DATA_DIR";
  } else {
    msg += "; tried:";
    for (const auto& t : tried) msg += "\n  " + t;
  }
  throw IngestError(msg);
}

PreparedData prepare_data(const SimConfig& cfg) {
  PreparedData out;
  if (cfg.data.source == DataSource::synthetic) {
    auto rng_train = make_rng(cfg.seed, {kTrainData});
    auto rng_eval = make_rng(cfg.seed, {kEvalData});
    out.train = make_synthetic(cfg.data.classes, cfg.data.dim,
                               cfg.data.train_samples, cfg.data.separation, rng_train);
    Dataset pool = make_synthetic(cfg.data.classes, cfg.data.dim,
                                  cfg.data.eval_samples, cfg.data.separation, rng_eval);
    auto rng_split = make_rng(cfg.seed, {kEvalSplit});
    std::tie(out.validation, out.test) = split_eval_pool(pool, rng_split);
  } else {
    out.train = load_idx(resolve_idx_file(cfg.data, "train-images-idx3-ubyte"),
                         resolve_idx_file(cfg.data, "train-labels-idx1-ubyte"));
    Dataset pool = load_idx(resolve_idx_file(cfg.data, "t10k-images-idx3-ubyte"),
                            resolve_idx_file(cfg.data, "t10k-labels-idx1-ubyte"));
    // classifiers need a consistent class count across pools
    out.train.num_classes = std::max(out.train.num_classes, pool.num_classes);
    pool.num_classes = out.train.num_classes;
    auto rng_split = make_rng(cfg.seed, {kEvalSplit});
    std::tie(out.validation, out.test) = split_eval_pool(pool, rng_split);
  }
  return out;
}

std::vector<int> default_hidden(const SimConfig& cfg) {
  if (!cfg.hidden_dims.empty()) return cfg.hidden_dims;
  return cfg.data.source == DataSource::synthetic ? std::vector<int>{32}
                                                  : std::vector<int>{64};
}

MlpModel build_model(const SimConfig& cfg, const Dataset& train) {
  std::vector<int> dims;
  dims.push_back(static_cast<int>(train.dim()));
  for (int h : default_hidden(cfg)) dims.push_back(h);
  dims.push_back(train.num_classes);
  auto rng = make_rng(cfg.seed, {kInit});
  return make_mlp(dims, Activation::relu, rng);
}

/// Trains every selected client and applies its transmission noise. Fans out
/// to std::async when cfg.threads != 1; per-task generators are derived from
/// (seed, round, client), so the fan-out order cannot change results.
std::vector<WeightedParams> train_selected(const SimConfig& cfg, const MlpModel& model,
                                           const std::vector<ClientShard>& shards,
                                           const std::vector<int>& selected, int round) {
  std::vector<WeightedParams> updates(selected.size());
  auto train_one = [&](std::size_t i) {
    const int k = selected[i];
    const ClientShard& shard = shards[static_cast<std::size_t>(k)];
    std::optional<int> epochs_override;
    if (shard.is_straggler) {
      auto rng = make_rng(cfg.seed, {kStragglerEpochs, static_cast<std::uint64_t>(round),
                                     static_cast<std::uint64_t>(k)});
      std::uniform_int_distribution<int> dist(1, cfg.train.epochs);
      epochs_override = dist(rng);
    }
    auto rng_train = make_rng(cfg.seed, {kClientTrain, static_cast<std::uint64_t>(round),
                                         static_cast<std::uint64_t>(k)});
    ParamVector update =
        client_update(model, shard.data, cfg.train, epochs_override, rng_train);
    auto rng_noise = make_rng(cfg.seed, {kClientNoise, static_cast<std::uint64_t>(round),
                                         static_cast<std::uint64_t>(k)});
    update = apply_update_noise(std::move(update), shard.sigma, rng_noise);
    updates[i] = WeightedParams{k, shard.size(), std::move(update)};
  };

  if (cfg.threads == 1 || selected.size() <= 1) {
    for (std::size_t i = 0; i < selected.size(); ++i) train_one(i);
  } else {
    std::vector<std::future<void>> tasks;
    tasks.reserve(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
      tasks.push_back(std::async(std::launch::async, train_one, i));
    }
    for (auto& t : tasks) t.get();
  }
  return updates;
}

SvReport exact_report(const CoalitionUtility& utility, const std::vector<int>& players) {
  SvReport report;
  report.round_sv = exact_shapley(utility, players);
  report.utility_evals =
      (1L << players.size()) - 2;  // all proper nonempty subsets
  return report;
}

double sample_stddev(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace

void validate(const SimConfig& cfg) {
  if (cfg.num_clients < 1) throw InputError("config: num_clients must be >= 1");
  if (cfg.budget < 1 || cfg.budget > cfg.num_clients) {
    throw InputError("config: budget must lie in [1, num_clients]");
  }
  if (cfg.rounds < 1) throw InputError("config: rounds must be >= 1");
  validate(cfg.train);
  validate(cfg.gtg);
  validate(cfg.strategy, cfg.num_clients, cfg.budget);
  if (cfg.exp_alpha < 0.0 || cfg.exp_alpha >= 1.0) {
    throw InputError("config: exp_alpha must lie in [0, 1)");
  }
  if (cfg.use_exact_sv && cfg.budget > 8) {
    throw ConfigError("config: the exact Shapley hook requires budget <= 8");
  }
  if (cfg.partition.dirichlet_alpha <= 0.0) {
    throw InputError("config: dirichlet alpha must be > 0");
  }
  if (cfg.perturb.straggler_fraction < 0.0 || cfg.perturb.straggler_fraction > 1.0) {
    throw InputError("config: straggler fraction must lie in [0, 1]");
  }
  if (cfg.perturb.noise_scale < 0.0) {
    throw InputError("config: noise scale must be >= 0");
  }
  if (cfg.threads < 0) throw InputError("config: threads must be >= 0");
  if (cfg.data.source == DataSource::synthetic) {
    if (cfg.data.classes < 2) throw InputError("config: synthetic classes must be >= 2");
    if (cfg.data.train_samples < cfg.num_clients) {
      throw InputError("config: synthetic train samples below client count");
    }
    if (cfg.data.eval_samples < 2) {
      throw InputError("config: synthetic eval samples must be >= 2");
    }
  }
}

RunResult run(const SimConfig& cfg) {
  validate(cfg);
  if (cfg.strategy.kind == StrategyKind::centralized) {
    return run_centralized(cfg);
  }

  const PreparedData data = prepare_data(cfg);

  PartitionSpec part = cfg.partition;
  part.num_clients = cfg.num_clients;
  auto rng_sizes = make_rng(cfg.seed, {kSizes});
  const std::vector<long> sizes =
      part.size_law == SizeLaw::power_law
          ? sample_power_law_sizes(cfg.num_clients,
                                   static_cast<long>(data.train.size()), rng_sizes)
          : uniform_sizes(cfg.num_clients, static_cast<long>(data.train.size()));
  auto rng_part = make_rng(cfg.seed, {kPartition});
  std::vector<ClientShard> shards = dirichlet_partition(data.train, part, sizes, rng_part);
  auto rng_perturb = make_rng(cfg.seed, {kPerturb});
  assign_perturbations(shards, cfg.perturb, rng_perturb);

  MlpModel model = build_model(cfg, data.train);

  std::vector<int> rr_order(static_cast<std::size_t>(cfg.num_clients));
  std::iota(rr_order.begin(), rr_order.end(), 0);
  auto rng_rr = make_rng(cfg.seed, {kRrOrder});
  std::shuffle(rr_order.begin(), rr_order.end(), rng_rr);

  std::vector<long> sample_counts(shards.size());
  for (std::size_t k = 0; k < shards.size(); ++k) sample_counts[k] = shards[k].size();

  CumulativeSv cumulative(cfg.num_clients, cfg.sv_mode, cfg.exp_alpha);

  RunResult result;
  result.config = cfg;
  result.records.reserve(static_cast<std::size_t>(cfg.rounds));

  for (int t = 0; t < cfg.rounds; ++t) {
    const auto t_start = std::chrono::steady_clock::now();
    try {
      SelectionContext ctx;
      ctx.round = t;
      ctx.num_clients = cfg.num_clients;
      ctx.budget = cfg.budget;
      ctx.cumulative = &cumulative;
      ctx.sample_counts = &sample_counts;
      ctx.rr_order = &rr_order;
      if (cfg.strategy.kind == StrategyKind::power_of_choice) {
        ctx.local_loss_query = [&](int k) {
          return forward_loss(model, shards[static_cast<std::size_t>(k)].data).loss;
        };
      }
      auto rng_select = make_rng(cfg.seed, {kSelect, static_cast<std::uint64_t>(t)});
      const std::vector<int> selected = select_clients(ctx, cfg.strategy, rng_select);

      const std::vector<WeightedParams> updates =
          train_selected(cfg, model, shards, selected, t);
      for (int k : selected) cumulative.record_selection(k);

      const ParamVector aggregated = model_average(updates);
      if (!aggregated.all_finite()) {
        throw TrainingError("aggregated model contains non-finite values");
      }

      const double val_before = forward_loss(model, data.validation).loss;
      MlpModel next = model;
      next.params = aggregated;
      const double val_after = forward_loss(next, data.validation).loss;

      // U(S): negative validation loss of the subset's weighted average;
      // the empty coalition is the current server model. The estimator
      // revisits the same prefixes across permutations, so results are
      // memoized by subset; this changes cost only, never values.
      std::map<std::vector<int>, double> utility_cache;
      CoalitionUtility utility;
      utility.empty_value = -val_before;
      utility.grand_value = -val_after;
      utility.eval = [&](const std::vector<int>& subset) {
        if (subset.empty()) return -val_before;
        std::vector<int> key = subset;
        std::sort(key.begin(), key.end());
        if (const auto hit = utility_cache.find(key); hit != utility_cache.end()) {
          return hit->second;
        }
        std::vector<WeightedParams> members;
        members.reserve(subset.size());
        for (int id : subset) {
          for (const auto& u : updates) {
            if (u.client_id == id) {
              members.push_back(u);
              break;
            }
          }
        }
        if (members.size() != subset.size()) {
          throw LogicError("utility subset references an unselected client");
        }
        MlpModel probe = model;
        probe.params = model_average(members);
        const double value = -forward_loss(probe, data.validation).loss;
        utility_cache.emplace(std::move(key), value);
        return value;
      };

      GtgConfig gtg = cfg.gtg;
      if (gtg.max_iters == 0) gtg.max_iters = 50L * cfg.budget;
      auto rng_gtg = make_rng(cfg.seed, {kGtg, static_cast<std::uint64_t>(t)});
      const SvReport report = cfg.use_exact_sv ? exact_report(utility, selected)
                                               : gtg_shapley(utility, selected, gtg, rng_gtg);
      cumulative.apply_round(report);

      model.params = aggregated;
      const LossAccuracy test = forward_loss(model, data.test);

      RoundRecord rec;
      rec.round = t;
      rec.selected = selected;
      rec.val_loss_before = val_before;
      rec.val_loss_after = val_after;
      rec.test_loss = test.loss;
      rec.test_accuracy = test.accuracy;
      rec.round_sv = report.round_sv;
      rec.utility_evals = report.utility_evals;
      rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t_start)
                           .count();
      result.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw RunError(t, e.what(), result.records);
    }
  }

  result.final_params = model.params;
  return result;
}

RunResult run_centralized(const SimConfig& cfg) {
  validate(cfg);
  const PreparedData data = prepare_data(cfg);
  MlpModel model = build_model(cfg, data.train);

  TrainConfig train_cfg = cfg.train;
  train_cfg.prox_mu = 0.0;  // plain SGD; the proximal pull is a client-side device

  RunResult result;
  result.config = cfg;
  result.records.reserve(static_cast<std::size_t>(cfg.rounds));
  for (int t = 0; t < cfg.rounds; ++t) {
    const auto t_start = std::chrono::steady_clock::now();
    try {
      const double val_before = forward_loss(model, data.validation).loss;
      auto rng_train =
          make_rng(cfg.seed, {kClientTrain, static_cast<std::uint64_t>(t), 0});
      model.params = client_update(model, data.train, train_cfg, std::nullopt, rng_train);
      const double val_after = forward_loss(model, data.validation).loss;
      const LossAccuracy test = forward_loss(model, data.test);

      RoundRecord rec;
      rec.round = t;
      rec.val_loss_before = val_before;
      rec.val_loss_after = val_after;
      rec.test_loss = test.loss;
      rec.test_accuracy = test.accuracy;
      rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t_start)
                           .count();
      result.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw RunError(t, e.what(), result.records);
    }
  }
  result.final_params = model.params;
  return result;
}

CompareSummary compare(const std::vector<SimConfig>& configs,
                       const std::vector<std::uint64_t>& seeds) {
  if (configs.empty() || seeds.empty()) {
    throw InputError("compare: need at least one config and one seed");
  }
  CompareSummary summary;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    CompareRow row;
    row.label = to_string(configs[c].strategy.kind);
    for (std::uint64_t seed : seeds) {
      SimConfig cfg = configs[c];
      cfg.seed = seed;
      try {
        const RunResult result = run(cfg);
        row.final_accuracies.push_back(result.records.back().test_accuracy);
      } catch (const std::exception& e) {
        throw Error("compare: config " + std::to_string(c) + " (" + row.label +
                    "), seed " + std::to_string(seed) + ": " + e.what());
      }
    }
    row.mean = std::accumulate(row.final_accuracies.begin(),
                               row.final_accuracies.end(), 0.0) /
               static_cast<double>(row.final_accuracies.size());
    row.stddev = sample_stddev(row.final_accuracies, row.mean);
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

std::string format_accuracy_cell(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", 100.0 * mean, 100.0 * stddev);
  return buf;
}

std::string format_table(const CompareSummary& summary) {
  std::size_t width = 8;
  for (const auto& row : summary.rows) width = std::max(width, row.label.size());
  std::ostringstream os;
  for (const auto& row : summary.rows) {
    os << row.label << std::string(width - row.label.size() + 2, ' ')
       << format_accuracy_cell(row.mean, row.stddev) << "\n";
  }
  return os.str();
}

}  // namespace fedshap
