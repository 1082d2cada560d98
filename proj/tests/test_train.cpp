#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedshap/data.hpp"
#include "fedshap/rng.hpp"
#include "fedshap/train.hpp"

using namespace fedshap;

namespace {

ParamVector constant_params(const ParamLayout& layout, double value) {
  ParamVector p = zeros_like(layout);
  p.values.setConstant(value);
  return p;
}

// Hand-coded gradient of mean cross-entropy for a linear softmax model,
// independent of the library's backward pass.
ParamVector linear_softmax_gradient(const MlpModel& model, const Dataset& data) {
  const auto w = model.params.weights(0);
  const auto b = model.params.bias(0);
  ParamVector grad = zeros_like(model.params.layout);
  auto gw = grad.weights(0);
  auto gb = grad.bias(0);
  const double n = static_cast<double>(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    std::vector<double> logits(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double acc = b(r);
      for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * data.features(i, c);
      logits[static_cast<std::size_t>(r)] = acc;
    }
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const double p = std::exp(logits[static_cast<std::size_t>(r)]) / denom;
      const double residual = p - (data.labels(i) == r ? 1.0 : 0.0);
      gb(r) += residual / n;
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        gw(r, c) += residual * data.features(i, c) / n;
      }
    }
  }
  return grad;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("zero learning rate returns the server parameters unchanged") {
  auto rng = make_rng(1);
  Dataset data = make_synthetic(3, 4, 30, 2.0, rng);
  MlpModel model = make_mlp({4, 6, 3}, Activation::relu, rng);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  auto rng_train = make_rng(2);
  const ParamVector out = client_update(model, data, cfg, std::nullopt, rng_train);
  CHECK(out.values == model.params.values);
}

TEST_CASE("one plain SGD step matches the hand-computed softmax gradient") {
  auto rng = make_rng(21);
  Dataset data = make_synthetic(3, 5, 16, 1.0, rng);
  MlpModel model;
  model.layer_dims = {5, 3};
  model.activation = Activation::relu;
  model.params = glorot_init(mlp_layout({5, 3}), rng);

  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batches_per_epoch = 1;  // the whole shard in one batch
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.0;

  const ParamVector grad = linear_softmax_gradient(model, data);
  const Eigen::VectorXd expected = model.params.values - cfg.learning_rate * grad.values;

  auto rng_train = make_rng(22);
  const ParamVector out = client_update(model, data, cfg, std::nullopt, rng_train);
  CHECK((out.values - expected).cwiseAbs().maxCoeff() < 1e-10);
  // server model untouched
  CHECK(model.params.values != out.values);
}

TEST_CASE("a dominant proximal term pulls a perturbed start toward the anchor") {
  // symmetric labels make the data gradient vanish at w = 0
  Dataset data;
  data.num_classes = 2;
  data.features.resize(4, 3);
  data.features << 1, 2, -1, 1, 2, -1, -2, 0.5, 1, -2, 0.5, 1;
  data.labels.resize(4);
  data.labels << 0, 1, 0, 1;

  MlpModel model;
  model.layer_dims = {3, 2};
  model.activation = Activation::relu;
  const ParamLayout layout = mlp_layout({3, 2});
  ParamVector anchor = zeros_like(layout);

  ParamVector start = zeros_like(layout);
  auto rng = make_rng(77);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (Eigen::Index i = 0; i < start.values.size(); ++i) start.values(i) = dist(rng);

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batches_per_epoch = 2;
  cfg.learning_rate = 0.01;
  cfg.momentum = 0.0;
  cfg.prox_mu = 10.0;

  auto rng_train = make_rng(78);
  const ParamVector out =
      run_local_sgd(model, start, anchor, data, cfg, cfg.epochs, rng_train);
  CHECK((out.values - anchor.values).norm() < (start.values - anchor.values).norm());
}

TEST_CASE("client_update is bit-reproducible for identical seed, data, config") {
  auto rng = make_rng(31);
  Dataset data = make_synthetic(4, 6, 37, 1.5, rng);
  MlpModel model = make_mlp({6, 8, 4}, Activation::relu, rng);
  TrainConfig cfg;
  cfg.momentum = 0.5;

  auto rng_a = make_rng(99, {1, 2});
  auto rng_b = make_rng(99, {1, 2});
  const ParamVector a = client_update(model, data, cfg, std::nullopt, rng_a);
  const ParamVector b = client_update(model, data, cfg, std::nullopt, rng_b);
  CHECK(a.values == b.values);
}

TEST_CASE("epochs_override caps work and invalid overrides are rejected") {
  auto rng = make_rng(41);
  Dataset data = make_synthetic(3, 4, 20, 1.0, rng);
  MlpModel model = make_mlp({4, 5, 3}, Activation::relu, rng);
  TrainConfig cfg;

  auto rng_a = make_rng(42);
  auto rng_b = make_rng(42);
  const ParamVector one_epoch = client_update(model, data, cfg, 1, rng_a);
  TrainConfig one;
  one.epochs = 1;
  const ParamVector direct = client_update(model, data, one, std::nullopt, rng_b);
  CHECK(one_epoch.values == direct.values);

  auto rng_c = make_rng(43);
  CHECK_THROWS_AS(client_update(model, data, cfg, 6, rng_c), ConfigError);
  CHECK_THROWS_AS(client_update(model, data, cfg, 0, rng_c), ConfigError);
}

TEST_CASE("shards smaller than B degrade to single-sample batches") {
  auto rng = make_rng(51);
  Dataset tiny = make_synthetic(2, 3, 3, 1.0, rng);  // 3 samples, B = 5
  MlpModel model = make_mlp({3, 4, 2}, Activation::relu, rng);
  TrainConfig cfg;
  auto rng_train = make_rng(52);
  const ParamVector out = client_update(model, tiny, cfg, std::nullopt, rng_train);
  CHECK(out.all_finite());
  CHECK(out.values != model.params.values);
}

TEST_CASE("empty shard is rejected") {
  auto rng = make_rng(61);
  MlpModel model = make_mlp({3, 2}, Activation::relu, rng);
  Dataset empty;
  empty.features.resize(0, 3);
  empty.labels.resize(0);
  empty.num_classes = 2;
  TrainConfig cfg;
  CHECK_THROWS_AS(client_update(model, empty, cfg, std::nullopt, rng), InputError);
}

TEST_CASE("model_average convex combinations") {
  const ParamLayout layout = mlp_layout({2, 2});

  SUBCASE("single entry is the identity") {
    WeightedParams e{0, 17, constant_params(layout, 3.25)};
    const ParamVector out = model_average({e});
    CHECK(out.values == e.params.values);
  }

  SUBCASE("weights 1:3 between ones and fives give 4.0 everywhere") {
    const std::vector<WeightedParams> entries = {
        {0, 1, constant_params(layout, 1.0)},
        {1, 3, constant_params(layout, 5.0)},
    };
    const ParamVector out = model_average(entries);
    CHECK(out.values.minCoeff() == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(out.values.maxCoeff() == doctest::Approx(4.0).epsilon(1e-15));
  }

  SUBCASE("equal weights reduce to the arithmetic mean") {
    auto rng = make_rng(71);
    std::vector<WeightedParams> entries;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(layout_size(layout));
    for (int k = 0; k < 5; ++k) {
      WeightedParams e{k, 7, zeros_like(layout)};
      std::uniform_real_distribution<double> dist(-1, 1);
      for (Eigen::Index i = 0; i < e.params.values.size(); ++i) {
        e.params.values(i) = dist(rng);
      }
      mean += e.params.values / 5.0;
      entries.push_back(std::move(e));
    }
    const ParamVector out = model_average(entries);
    CHECK((out.values - mean).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("model_average is permutation-invariant bit for bit") {
  const ParamLayout layout = mlp_layout({3, 4, 2});
  auto rng = make_rng(81);
  std::vector<WeightedParams> entries;
  std::uniform_real_distribution<double> dist(-2, 2);
  std::uniform_int_distribution<long> weight(1, 50);
  for (int k = 0; k < 7; ++k) {
    WeightedParams e{k, weight(rng), zeros_like(layout)};
    for (Eigen::Index i = 0; i < e.params.values.size(); ++i) {
      e.params.values(i) = dist(rng);
    }
    entries.push_back(std::move(e));
  }
  const ParamVector base = model_average(entries);
  for (int shuffle_round = 0; shuffle_round < 10; ++shuffle_round) {
    std::shuffle(entries.begin(), entries.end(), rng);
    const ParamVector again = model_average(entries);
    CHECK(again.values == base.values);
  }
}

TEST_CASE("model_average stays inside the per-coordinate envelope") {
  const ParamLayout layout = mlp_layout({4, 3});
  auto rng = make_rng(91);
  std::vector<WeightedParams> entries;
  std::uniform_real_distribution<double> dist(-5, 5);
  std::uniform_int_distribution<long> weight(1, 9);
  for (int k = 0; k < 6; ++k) {
    WeightedParams e{k, weight(rng), zeros_like(layout)};
    for (Eigen::Index i = 0; i < e.params.values.size(); ++i) {
      e.params.values(i) = dist(rng);
    }
    entries.push_back(std::move(e));
  }
  const ParamVector out = model_average(entries);
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    double lo = entries[0].params.values(i), hi = lo;
    for (const auto& e : entries) {
      lo = std::min(lo, e.params.values(i));
      hi = std::max(hi, e.params.values(i));
    }
    CHECK(out.values(i) >= lo - 1e-12);
    CHECK(out.values(i) <= hi + 1e-12);
  }
}

TEST_CASE("model_average input validation") {
  CHECK_THROWS_AS(model_average({}), InputError);
  const std::vector<WeightedParams> mismatched = {
      {0, 1, zeros_like(mlp_layout({2, 2}))},
      {1, 1, zeros_like(mlp_layout({2, 3, 2}))},
  };
  CHECK_THROWS_AS(model_average(mismatched), ConfigError);
  const std::vector<WeightedParams> nonpositive = {
      {0, 0, zeros_like(mlp_layout({2, 2}))},
  };
  CHECK_THROWS_AS(model_average(nonpositive), InputError);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.batches_per_epoch = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.prox_mu = -1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

}  // TEST_SUITE
