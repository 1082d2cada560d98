#include "fedshap/train.hpp"

#include <algorithm>
#include <numeric>

namespace fedshap {

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batches_per_epoch < 1) throw ConfigError("train: batches_per_epoch must be >= 1");
  if (cfg.learning_rate < 0.0) throw ConfigError("train: learning_rate must be >= 0");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw ConfigError("train: momentum must lie in [0, 1)");
  }
  if (cfg.prox_mu < 0.0) throw ConfigError("train: prox_mu must be >= 0");
}

namespace {

// Contiguous batch extents over a shuffled index order: B equal batches with
// the last absorbing the remainder, degrading to single-sample batches when
// the shard is smaller than B.
std::vector<std::pair<long, long>> batch_extents(long n, int batches) {
  std::vector<std::pair<long, long>> extents;
  if (n < batches) {
    for (long i = 0; i < n; ++i) extents.emplace_back(i, 1);
    return extents;
  }
  const long base = n / batches;
  for (int b = 0; b < batches; ++b) {
    const long start = static_cast<long>(b) * base;
    const long len = (b + 1 == batches) ? n - start : base;
    extents.emplace_back(start, len);
  }
  return extents;
}

}  // namespace

ParamVector run_local_sgd(const MlpModel& model, const ParamVector& start,
                          const ParamVector& prox_anchor, const Dataset& data,
                          const TrainConfig& cfg, int epochs, std::mt19937_64& rng) {
  validate(cfg);
  if (data.size() == 0) throw InputError("local training: empty dataset");
  if (epochs < 1) throw ConfigError("local training: epochs must be >= 1");

  MlpModel worker = model;
  worker.params = start;
  ParamVector velocity = zeros_like(start.layout);
  ParamVector grad = zeros_like(start.layout);

  const long n = static_cast<long>(data.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const auto extents = batch_extents(n, cfg.batches_per_epoch);

  Eigen::MatrixXd batch_x;
  Eigen::VectorXi batch_y;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto& [begin, len] : extents) {
      batch_x.resize(len, data.dim());
      batch_y.resize(len);
      for (long i = 0; i < len; ++i) {
        batch_x.row(i) = data.features.row(order[static_cast<std::size_t>(begin + i)]);
        batch_y(i) = data.labels(order[static_cast<std::size_t>(begin + i)]);
      }
      loss_and_gradient(worker, batch_x, batch_y, cfg.prox_mu,
                        cfg.prox_mu > 0.0 ? &prox_anchor : nullptr, grad);
      if (!grad.all_finite()) {
        throw TrainingError("non-finite gradient in epoch " + std::to_string(epoch));
      }
      velocity.values = cfg.momentum * velocity.values + grad.values;
      worker.params.values -= cfg.learning_rate * velocity.values;
    }
  }
  if (!worker.params.all_finite()) {
    throw TrainingError("non-finite parameters after local training");
  }
  return std::move(worker.params);
}

ParamVector client_update(const MlpModel& model, const Dataset& data,
                          const TrainConfig& cfg,
                          std::optional<int> epochs_override, std::mt19937_64& rng) {
  int epochs = cfg.epochs;
  if (epochs_override) {
    if (*epochs_override < 1 || *epochs_override > cfg.epochs) {
      throw ConfigError("epochs_override must lie in [1, epochs]");
    }
    epochs = *epochs_override;
  }
  return run_local_sgd(model, model.params, model.params, data, cfg, epochs, rng);
}

ParamVector model_average(const std::vector<WeightedParams>& entries) {
  if (entries.empty()) throw InputError("model_average: empty entry list");

  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entries[a].client_id < entries[b].client_id;
  });

  double total = 0.0;
  for (const auto& e : entries) {
    if (e.sample_count <= 0) {
      throw InputError("model_average: sample_count must be positive");
    }
    require_same_layout(entries.front().params, e.params, "model_average");
    total += static_cast<double>(e.sample_count);
  }

  ParamVector out = zeros_like(entries.front().params.layout);
  for (std::size_t idx : order) {
    const auto& e = entries[idx];
    out.values += (static_cast<double>(e.sample_count) / total) * e.params.values;
  }
  return out;
}

}  // namespace fedshap
