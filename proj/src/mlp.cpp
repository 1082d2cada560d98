#include "fedshap/mlp.hpp"

#include <cmath>

namespace fedshap {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh_act: return "tanh";
  }
  throw LogicError("unknown activation");
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh_act;
  throw ConfigError("unknown activation: " + name);
}

ParamLayout mlp_layout(const std::vector<int>& layer_dims) {
  if (layer_dims.size() < 2) {
    throw ConfigError("mlp needs at least input and output dimensions");
  }
  ParamLayout layout;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    if (layer_dims[l] <= 0 || layer_dims[l + 1] <= 0) {
      throw ConfigError("mlp layer dimensions must be positive");
    }
    layout.push_back({layer_dims[l + 1], layer_dims[l]});
  }
  return layout;
}

ParamVector glorot_init(const ParamLayout& layout, std::mt19937_64& rng) {
  ParamVector params = zeros_like(layout);
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layout[l].rows + layout[l].cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = params.weights(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w(i, j) = dist(rng);
      }
    }
  }
  return params;
}

MlpModel make_mlp(const std::vector<int>& layer_dims, Activation activation,
                  std::mt19937_64& rng) {
  MlpModel model;
  model.layer_dims = layer_dims;
  model.activation = activation;
  model.params = glorot_init(mlp_layout(layer_dims), rng);
  return model;
}

namespace {

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::relu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

// derivative mask evaluated at the post-activation values
Eigen::ArrayXXd activation_grad(const Eigen::MatrixXd& activated, Activation act) {
  if (act == Activation::relu) {
    return (activated.array() > 0.0).cast<double>();
  }
  return 1.0 - activated.array().square();
}

void check_features(const MlpModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.input_dim()) {
    throw ConfigError("feature dimension " + std::to_string(features.cols()) +
                      " does not match model input dimension " +
                      std::to_string(model.input_dim()));
  }
}

// Row-wise stable log-sum-exp; also exposes softmax probabilities.
struct SoftmaxStats {
  Eigen::VectorXd log_sum_exp;  // per row
  Eigen::MatrixXd probs;
};

SoftmaxStats softmax_stats(const Eigen::MatrixXd& logits) {
  SoftmaxStats s;
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.colwise() - row_max;
  s.probs = shifted.array().exp().matrix();
  const Eigen::VectorXd sums = s.probs.rowwise().sum();
  s.log_sum_exp = sums.array().log().matrix() + row_max;
  s.probs.array().colwise() /= sums.array();
  return s;
}

}  // namespace

Eigen::MatrixXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& features) {
  check_features(model, features);
  const std::size_t layers = model.params.layout.size();
  Eigen::MatrixXd a = features;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = a * model.params.weights(l).transpose();
    z.rowwise() += model.params.bias(l).transpose();
    if (l + 1 < layers) apply_activation(z, model.activation);
    a = std::move(z);
  }
  return a;
}

LossAccuracy forward_loss(const MlpModel& model, const Dataset& data) {
  if (data.size() == 0) {
    throw InputError("forward_loss: empty dataset");
  }
  if (data.num_classes != model.num_classes()) {
    throw ConfigError("dataset classes " + std::to_string(data.num_classes) +
                      " do not match model output " +
                      std::to_string(model.num_classes()));
  }
  const Eigen::MatrixXd logits = forward_logits(model, data.features);
  const SoftmaxStats s = softmax_stats(logits);

  double loss = 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = data.labels(i);
    loss += s.log_sum_exp(i) - logits(i, y);
    Eigen::Index pred = 0;
    logits.row(i).maxCoeff(&pred);
    if (pred == y) ++correct;
  }
  const double n = static_cast<double>(logits.rows());
  return {loss / n, static_cast<double>(correct) / n};
}

double loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& features,
                         const Eigen::VectorXi& labels, double prox_mu,
                         const ParamVector* anchor, ParamVector& grad) {
  check_features(model, features);
  const Eigen::Index n = features.rows();
  if (n == 0) throw InputError("loss_and_gradient: empty batch");
  const std::size_t layers = model.params.layout.size();

  // forward, keeping activations for the backward sweep
  std::vector<Eigen::MatrixXd> acts;  // acts[l] is the input to layer l
  acts.reserve(layers + 1);
  acts.push_back(features);
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = acts.back() * model.params.weights(l).transpose();
    z.rowwise() += model.params.bias(l).transpose();
    if (l + 1 < layers) apply_activation(z, model.activation);
    acts.push_back(std::move(z));
  }
  const Eigen::MatrixXd& logits = acts.back();
  const SoftmaxStats s = softmax_stats(logits);

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += s.log_sum_exp(i) - logits(i, labels(i));
  }
  loss /= static_cast<double>(n);

  if (grad.layout != model.params.layout) {
    grad = zeros_like(model.params.layout);
  }

  // d(mean CE)/d(logits)
  Eigen::MatrixXd delta = s.probs;
  for (Eigen::Index i = 0; i < n; ++i) {
    delta(i, labels(i)) -= 1.0;
  }
  delta /= static_cast<double>(n);

  for (std::size_t l = layers; l-- > 0;) {
    grad.weights(l) = delta.transpose() * acts[l];
    grad.bias(l) = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd upstream = delta * model.params.weights(l);
      delta = (upstream.array() * activation_grad(acts[l], model.activation)).matrix();
    }
  }

  if (prox_mu > 0.0) {
    if (anchor == nullptr) {
      throw ConfigError("proximal term requires an anchor parameter vector");
    }
    require_same_layout(model.params, *anchor, "proximal anchor");
    const Eigen::VectorXd diff = model.params.values - anchor->values;
    loss += 0.5 * prox_mu * diff.squaredNorm();
    grad.values += prox_mu * diff;
  }
  return loss;
}

}  // namespace fedshap
