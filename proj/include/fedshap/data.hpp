#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fedshap/dataset.hpp"
#include "fedshap/param_vector.hpp"

namespace fedshap {

enum class SizeLaw { power_law, uniform };

std::string to_string(SizeLaw law);
SizeLaw size_law_from_string(const std::string& name);

struct PartitionSpec {
  double dirichlet_alpha = 1e-4;  // label-skew concentration
  int num_clients = 0;
  SizeLaw size_law = SizeLaw::power_law;
};

struct PerturbationSpec {
  double straggler_fraction = 0.0;  // x in [0, 1]
  double noise_scale = 0.0;         // sigma >= 0
  /// Optional explicit noise-rank permutation of [N]; client
  /// noise_assignment[i] receives sigma_k = i * sigma / N. Empty draws a
  /// random permutation.
  std::vector<int> noise_assignment;
};

struct ClientShard {
  int client_id = 0;
  Dataset data;
  bool is_straggler = false;
  double sigma = 0.0;  // per-client noise level sigma_k

  long size() const { return static_cast<long>(data.size()); }
};

/// Parses a big-endian IDX image/label file pair (magics 0x00000803 and
/// 0x00000801). Pixels are scaled to [0, 1] by dividing by 255. Files with a
/// 0x1F8B prefix are transparently gunzipped.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Inverse CDF of the size law P(x) = 3x^2 on (0, 1): x = u^(1/3).
double power_law_inverse_cdf(double u);

/// Client dataset sizes under the power law P(x) = 3x^2: draws x_k by inverse
/// CDF, normalizes to proportions q_k, and rounds with largest-remainder
/// correction so the sizes sum to n_train with every client keeping at least
/// one sample.
std::vector<long> sample_power_law_sizes(int num_clients, long n_train,
                                         std::mt19937_64& rng);

/// Even split with the remainder spread over the first clients.
std::vector<long> uniform_sizes(int num_clients, long n_train);

/// Label-skewed disjoint shards: per client draw label proportions from
/// Dirichlet(alpha), then fill the shard by sampling labels and drawing
/// without replacement from per-label pools, falling back to the remaining
/// global pool when a label runs dry.
std::vector<ClientShard> dirichlet_partition(const Dataset& data,
                                             const PartitionSpec& spec,
                                             const std::vector<long>& sizes,
                                             std::mt19937_64& rng);

/// Marks a uniform floor(x * N)-subset as stragglers and assigns noise levels
/// sigma_k = (rank - 1) * sigma / N along the (given or drawn) permutation.
void assign_perturbations(std::vector<ClientShard>& shards,
                          const PerturbationSpec& spec, std::mt19937_64& rng);

/// Adds IID Gaussian noise N(0, sigma^2) per coordinate; sigma == 0 returns
/// the input unchanged, bit for bit.
ParamVector apply_update_noise(ParamVector params, double sigma, std::mt19937_64& rng);

/// Gaussian blobs with unit covariance, one mean per class at
/// separation * e_c (requires dim >= num_classes); labels balanced up to
/// rounding.
Dataset make_synthetic(int num_classes, int dim, long n, double separation,
                       std::mt19937_64& rng);

/// Splits the server's evaluation pool into disjoint validation and test
/// halves, deterministically for a given generator.
std::pair<Dataset, Dataset> split_eval_pool(const Dataset& pool, std::mt19937_64& rng);

}  // namespace fedshap
