#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "fedshap/errors.hpp"

namespace fedshap {

/// Shape of one dense layer: a rows x cols weight matrix plus a bias of
/// length rows.
struct LayerShape {
  Eigen::Index rows = 0;  // output dimension
  Eigen::Index cols = 0;  // input dimension

  bool operator==(const LayerShape&) const = default;

  Eigen::Index weight_size() const { return rows * cols; }
  Eigen::Index size() const { return rows * cols + rows; }
};

using ParamLayout = std::vector<LayerShape>;

inline Eigen::Index layout_size(const ParamLayout& layout) {
  Eigen::Index total = 0;
  for (const auto& shape : layout) total += shape.size();
  return total;
}

inline Eigen::Index layer_offset(const ParamLayout& layout, std::size_t layer) {
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < layer; ++i) off += layout[i].size();
  return off;
}

/// Flat parameter vector carrying the layer layout needed to view its
/// segments as weight matrices and bias vectors. Two ParamVectors are
/// combinable only when their layouts are identical.
struct ParamVector {
  Eigen::VectorXd values;
  ParamLayout layout;

  Eigen::Index size() const { return values.size(); }
  bool same_layout(const ParamVector& other) const { return layout == other.layout; }
  bool all_finite() const { return values.allFinite(); }

  Eigen::Map<Eigen::MatrixXd> weights(std::size_t layer) {
    const auto& s = layout[layer];
    return {values.data() + layer_offset(layout, layer), s.rows, s.cols};
  }
  Eigen::Map<const Eigen::MatrixXd> weights(std::size_t layer) const {
    const auto& s = layout[layer];
    return {values.data() + layer_offset(layout, layer), s.rows, s.cols};
  }
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer) {
    const auto& s = layout[layer];
    return {values.data() + layer_offset(layout, layer) + s.weight_size(), s.rows};
  }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const {
    const auto& s = layout[layer];
    return {values.data() + layer_offset(layout, layer) + s.weight_size(), s.rows};
  }
};

inline ParamVector zeros_like(const ParamLayout& layout) {
  return {Eigen::VectorXd::Zero(layout_size(layout)), layout};
}

inline void require_same_layout(const ParamVector& a, const ParamVector& b,
                                const char* context) {
  if (!a.same_layout(b)) {
    throw ConfigError(std::string(context) + ": parameter layouts differ");
  }
}

}  // namespace fedshap
