#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fedshap/errors.hpp"

namespace fedshap {

/// Labeled classification dataset: one feature row per sample, labels in
/// [0, num_classes).
struct Dataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXi labels;    // n
  int num_classes = 0;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  Dataset subset(const std::vector<Eigen::Index>& indices) const {
    Dataset out;
    out.num_classes = num_classes;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
    out.labels.resize(static_cast<Eigen::Index>(indices.size()));
    for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
      out.features.row(i) = features.row(indices[static_cast<std::size_t>(i)]);
      out.labels(i) = labels(indices[static_cast<std::size_t>(i)]);
    }
    return out;
  }
};

inline void validate(const Dataset& data) {
  if (data.features.rows() != data.labels.size()) {
    throw InputError("dataset: feature rows and label count differ");
  }
  if (data.num_classes <= 0) {
    throw InputError("dataset: num_classes must be positive");
  }
  for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
    if (data.labels(i) < 0 || data.labels(i) >= data.num_classes) {
      throw InputError("dataset: label out of range at row " + std::to_string(i));
    }
  }
}

}  // namespace fedshap
