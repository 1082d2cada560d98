#include "fedshap/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

namespace fedshap {

std::string to_string(SizeLaw law) {
  return law == SizeLaw::power_law ? "power_law" : "uniform";
}

SizeLaw size_law_from_string(const std::string& name) {
  if (name == "power_law") return SizeLaw::power_law;
  if (name == "uniform") return SizeLaw::uniform;
  throw ConfigError("unknown size law: " + name);
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& compressed,
                                  const std::string& path) {
  z_stream strm{};
  if (inflateInit2(&strm, 15 + 32) != Z_OK) {  // accept gzip and zlib wrappers
    throw IngestError("zlib init failed for " + path);
  }
  std::vector<unsigned char> out;
  std::vector<unsigned char> chunk(1 << 16);
  strm.next_in = const_cast<unsigned char*>(compressed.data());
  strm.avail_in = static_cast<uInt>(compressed.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    strm.next_out = chunk.data();
    strm.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw IngestError("gzip decompression failed for " + path);
    }
    out.insert(out.end(), chunk.data(),
               chunk.data() + (chunk.size() - strm.avail_out));
  }
  inflateEnd(&strm);
  return out;
}

std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
  std::vector<unsigned char> bytes = read_all(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B) {
    return gunzip(bytes, path);
  }
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const char* field, const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw IngestError("truncated " + std::string(field) + " at byte offset " +
                      std::to_string(offset) + " in " + path);
  }
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_maybe_gzip(images_path);
  const auto lab = read_maybe_gzip(labels_path);

  const std::uint32_t img_magic = read_be32(img, 0, "image magic", images_path);
  if (img_magic != kImagesMagic) {
    throw IngestError("bad magic in image file " + images_path + ": got 0x" +
                      [&] {
                        char buf[16];
                        std::snprintf(buf, sizeof buf, "%08x", img_magic);
                        return std::string(buf);
                      }() +
                      " at byte offset 0, expected 0x00000803");
  }
  const std::uint32_t count = read_be32(img, 4, "image count", images_path);
  const std::uint32_t rows = read_be32(img, 8, "image rows", images_path);
  const std::uint32_t cols = read_be32(img, 12, "image cols", images_path);
  const std::size_t pixel_bytes =
      static_cast<std::size_t>(count) * rows * cols;
  if (img.size() < 16 + pixel_bytes) {
    throw IngestError("truncated pixel data (byte offset 16) in " + images_path +
                      ": need " + std::to_string(pixel_bytes) + " bytes, have " +
                      std::to_string(img.size() - 16));
  }

  const std::uint32_t lab_magic = read_be32(lab, 0, "label magic", labels_path);
  if (lab_magic != kLabelsMagic) {
    throw IngestError("bad magic in label file " + labels_path + ": got 0x" +
                      [&] {
                        char buf[16];
                        std::snprintf(buf, sizeof buf, "%08x", lab_magic);
                        return std::string(buf);
                      }() +
                      " at byte offset 0, expected 0x00000801");
  }
  const std::uint32_t lab_count = read_be32(lab, 4, "label count", labels_path);
  if (lab_count != count) {
    throw IngestError("count mismatch: " + images_path + " holds " +
                      std::to_string(count) + " images but " + labels_path +
                      " holds " + std::to_string(lab_count) +
                      " labels (label count field at byte offset 4)");
  }
  if (lab.size() < 8 + static_cast<std::size_t>(lab_count)) {
    throw IngestError("truncated label data at byte offset " + std::to_string(8) +
                      " in " + labels_path);
  }

  Dataset data;
  const Eigen::Index dim = static_cast<Eigen::Index>(rows) * cols;
  data.features.resize(static_cast<Eigen::Index>(count), dim);
  data.labels.resize(static_cast<Eigen::Index>(count));
  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t base = 16 + static_cast<std::size_t>(i) * dim;
    for (Eigen::Index j = 0; j < dim; ++j) {
      data.features(static_cast<Eigen::Index>(i), j) =
          static_cast<double>(img[base + static_cast<std::size_t>(j)]) / 255.0;
    }
    const int label = lab[8 + i];
    data.labels(static_cast<Eigen::Index>(i)) = label;
    max_label = std::max(max_label, label);
  }
  data.num_classes = max_label + 1;
  return data;
}

double power_law_inverse_cdf(double u) { return std::cbrt(u); }

std::vector<long> sample_power_law_sizes(int num_clients, long n_train,
                                         std::mt19937_64& rng) {
  if (num_clients < 1) throw InputError("power_law_sizes: need at least one client");
  if (n_train < num_clients) {
    throw InputError("power_law_sizes: n_train " + std::to_string(n_train) +
                     " below client count " + std::to_string(num_clients));
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> q(static_cast<std::size_t>(num_clients));
  double total = 0.0;
  for (auto& x : q) {
    double u = unit(rng);
    while (u == 0.0) u = unit(rng);
    x = power_law_inverse_cdf(u);
    total += x;
  }
  for (auto& x : q) x /= total;

  // largest-remainder rounding to hit n_train exactly
  std::vector<long> sizes(q.size());
  std::vector<std::pair<double, std::size_t>> remainder(q.size());
  long assigned = 0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double target = q[k] * static_cast<double>(n_train);
    sizes[k] = static_cast<long>(std::floor(target));
    remainder[k] = {target - std::floor(target), k};
    assigned += sizes[k];
  }
  std::sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (long i = 0; i < n_train - assigned; ++i) {
    sizes[remainder[static_cast<std::size_t>(i)].second] += 1;
  }
  // every client keeps at least one sample
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    while (sizes[k] < 1) {
      const auto donor = static_cast<std::size_t>(
          std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      if (sizes[donor] <= 1) throw LogicError("power_law_sizes: cannot rebalance");
      sizes[donor] -= 1;
      sizes[k] += 1;
    }
  }
  return sizes;
}

std::vector<long> uniform_sizes(int num_clients, long n_train) {
  if (num_clients < 1) throw InputError("uniform_sizes: need at least one client");
  if (n_train < num_clients) {
    throw InputError("uniform_sizes: n_train below client count");
  }
  std::vector<long> sizes(static_cast<std::size_t>(num_clients),
                          n_train / num_clients);
  for (long i = 0; i < n_train % num_clients; ++i) {
    sizes[static_cast<std::size_t>(i)] += 1;
  }
  return sizes;
}

namespace {

// Dirichlet(alpha * 1_C) draw via normalized gammas. Extremely small alpha
// underflows every gamma to zero; the distribution then sits on a uniformly
// random vertex of the simplex, which is what the fallback returns.
std::vector<double> dirichlet_draw(double alpha, int classes, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(static_cast<std::size_t>(classes));
  double total = 0.0;
  for (auto& v : p) {
    v = gamma(rng);
    if (!std::isfinite(v)) v = 0.0;
    total += v;
  }
  if (total <= 0.0 || !std::isfinite(total)) {
    std::uniform_int_distribution<int> pick(0, classes - 1);
    std::fill(p.begin(), p.end(), 0.0);
    p[static_cast<std::size_t>(pick(rng))] = 1.0;
    return p;
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace

std::vector<ClientShard> dirichlet_partition(const Dataset& data,
                                             const PartitionSpec& spec,
                                             const std::vector<long>& sizes,
                                             std::mt19937_64& rng) {
  validate(data);
  if (spec.dirichlet_alpha <= 0.0) {
    throw ConfigError("partition: dirichlet alpha must be > 0");
  }
  if (sizes.size() != static_cast<std::size_t>(spec.num_clients)) {
    throw ConfigError("partition: sizes length does not match num_clients");
  }
  long total = 0;
  for (long s : sizes) {
    if (s < 1) throw InputError("partition: every shard needs at least one sample");
    total += s;
  }
  if (total > data.size()) {
    throw InputError("partition: requested " + std::to_string(total) +
                     " samples but dataset holds " + std::to_string(data.size()));
  }

  const int classes = data.num_classes;
  std::vector<std::vector<Eigen::Index>> pools(static_cast<std::size_t>(classes));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    pools[static_cast<std::size_t>(data.labels(i))].push_back(i);
  }
  for (auto& pool : pools) std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<std::size_t> cursor(pools.size(), 0);
  std::vector<long> remaining(pools.size());
  for (std::size_t c = 0; c < pools.size(); ++c) {
    remaining[c] = static_cast<long>(pools[c].size());
  }

  std::vector<ClientShard> shards;
  shards.reserve(sizes.size());
  for (int k = 0; k < spec.num_clients; ++k) {
    const std::vector<double> p = dirichlet_draw(spec.dirichlet_alpha, classes, rng);
    std::discrete_distribution<int> label_dist(p.begin(), p.end());
    std::vector<Eigen::Index> indices;
    indices.reserve(static_cast<std::size_t>(sizes[static_cast<std::size_t>(k)]));
    for (long i = 0; i < sizes[static_cast<std::size_t>(k)]; ++i) {
      int c = label_dist(rng);
      if (remaining[static_cast<std::size_t>(c)] == 0) {
        // label pool dry: draw uniformly from whatever is left anywhere
        std::discrete_distribution<int> fallback(remaining.begin(), remaining.end());
        c = fallback(rng);
      }
      auto& cur = cursor[static_cast<std::size_t>(c)];
      indices.push_back(pools[static_cast<std::size_t>(c)][cur++]);
      remaining[static_cast<std::size_t>(c)] -= 1;
    }
    ClientShard shard;
    shard.client_id = k;
    shard.data = data.subset(indices);
    shards.push_back(std::move(shard));
  }
  return shards;
}

void assign_perturbations(std::vector<ClientShard>& shards,
                          const PerturbationSpec& spec, std::mt19937_64& rng) {
  const int n = static_cast<int>(shards.size());
  if (n == 0) return;
  if (spec.straggler_fraction < 0.0 || spec.straggler_fraction > 1.0) {
    throw ConfigError("perturbations: straggler fraction must lie in [0, 1]");
  }
  if (spec.noise_scale < 0.0) {
    throw ConfigError("perturbations: noise scale must be >= 0");
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto straggler_count =
      static_cast<std::size_t>(std::floor(spec.straggler_fraction * n));
  for (auto& shard : shards) shard.is_straggler = false;
  for (std::size_t i = 0; i < straggler_count; ++i) {
    shards[static_cast<std::size_t>(order[i])].is_straggler = true;
  }

  std::vector<int> noise_order;
  if (!spec.noise_assignment.empty()) {
    if (spec.noise_assignment.size() != static_cast<std::size_t>(n)) {
      throw ConfigError("perturbations: noise_assignment must cover every client");
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int k : spec.noise_assignment) {
      if (k < 0 || k >= n || seen[static_cast<std::size_t>(k)]) {
        throw ConfigError("perturbations: noise_assignment is not a permutation");
      }
      seen[static_cast<std::size_t>(k)] = 1;
    }
    noise_order = spec.noise_assignment;
  } else {
    noise_order.resize(static_cast<std::size_t>(n));
    std::iota(noise_order.begin(), noise_order.end(), 0);
    std::shuffle(noise_order.begin(), noise_order.end(), rng);
  }
  for (std::size_t rank = 0; rank < noise_order.size(); ++rank) {
    shards[static_cast<std::size_t>(noise_order[rank])].sigma =
        static_cast<double>(rank) * spec.noise_scale / static_cast<double>(n);
  }
}

ParamVector apply_update_noise(ParamVector params, double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw InputError("update noise: sigma must be >= 0");
  if (sigma == 0.0) return params;
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    params.values(i) += gauss(rng);
  }
  return params;
}

Dataset make_synthetic(int num_classes, int dim, long n, double separation,
                       std::mt19937_64& rng) {
  if (num_classes < 2) throw InputError("synthetic: need at least two classes");
  if (n < num_classes) throw InputError("synthetic: need at least one sample per class");
  if (dim < num_classes) {
    throw InputError("synthetic: dim must be >= num_classes to place class means "
                     "on the simplex");
  }
  Dataset data;
  data.num_classes = num_classes;
  data.features.resize(static_cast<Eigen::Index>(n), dim);
  data.labels.resize(static_cast<Eigen::Index>(n));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (long i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % num_classes);
    data.labels(static_cast<Eigen::Index>(i)) = label;
    for (int j = 0; j < dim; ++j) {
      data.features(static_cast<Eigen::Index>(i), j) =
          gauss(rng) + (j == label ? separation : 0.0);
    }
  }
  return data;
}

std::pair<Dataset, Dataset> split_eval_pool(const Dataset& pool, std::mt19937_64& rng) {
  if (pool.size() < 2) throw InputError("eval split: pool needs at least two samples");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(pool.size()));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t half = order.size() / 2;
  std::vector<Eigen::Index> val_idx(order.begin(),
                                    order.begin() + static_cast<long>(half));
  std::vector<Eigen::Index> test_idx(order.begin() + static_cast<long>(half),
                                     order.end());
  return {pool.subset(val_idx), pool.subset(test_idx)};
}

}  // namespace fedshap
