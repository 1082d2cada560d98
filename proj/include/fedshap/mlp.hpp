#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "fedshap/dataset.hpp"
#include "fedshap/param_vector.hpp"

namespace fedshap {

enum class Activation { relu, tanh_act };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Fully connected classifier with manual backpropagation. layer_dims lists
/// input dimension, hidden widths, and the class count; a two-entry list is a
/// plain linear softmax model.
struct MlpModel {
  std::vector<int> layer_dims;
  Activation activation = Activation::relu;
  ParamVector params;

  int input_dim() const { return layer_dims.front(); }
  int num_classes() const { return layer_dims.back(); }
};

ParamLayout mlp_layout(const std::vector<int>& layer_dims);

/// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)) per layer;
/// biases start at zero.
ParamVector glorot_init(const ParamLayout& layout, std::mt19937_64& rng);

MlpModel make_mlp(const std::vector<int>& layer_dims, Activation activation,
                  std::mt19937_64& rng);

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Softmax logits for a feature batch.
Eigen::MatrixXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& features);

/// Mean cross-entropy and argmax accuracy over a dataset.
LossAccuracy forward_loss(const MlpModel& model, const Dataset& data);

/// Mean cross-entropy over (features, labels) plus, when prox_mu > 0, the
/// proximal penalty prox_mu/2 * ||params - anchor||^2. The gradient of the
/// full objective with respect to model.params is written to grad.
/// anchor may be null when prox_mu == 0.
double loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& features,
                         const Eigen::VectorXi& labels, double prox_mu,
                         const ParamVector* anchor, ParamVector& grad);

}  // namespace fedshap
