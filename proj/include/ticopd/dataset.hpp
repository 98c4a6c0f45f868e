#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ticopd {

/// Labelled samples. `features` is p x m: one column per sample.
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.rows()); }
};

/// Samples `indices` (in that order) out of `data`.
Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices);

/// Appends a constant-one feature row so linear models get a bias term.
Dataset with_bias_feature(const Dataset& data);

/// Reads an IDX image/label pair (magic 0x00000803 / 0x00000801, big-endian
/// dimensions). Pixels are scaled to [0, 1] by 1/255. `limit` > 0 keeps only
/// the first `limit` samples. Throws std::runtime_error on bad magic,
/// truncation, or a count mismatch.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t limit = 0);

struct IdxHeader {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
};

IdxHeader read_idx_header(const std::filesystem::path& path);

/// Gaussian class clusters: class c has a random unit-scale mean scaled by
/// `separation`, with isotropic noise of standard deviation `noise`. Samples
/// are emitted grouped by class (class 0 first), `per_class` each. The class
/// means depend only on `seed`; `sample_stream` selects an independent draw
/// of samples around them (e.g. a held-out split).
Dataset make_gaussian_classes(int classes, std::size_t features, std::size_t per_class,
                              double separation, double noise, std::uint64_t seed,
                              std::uint64_t sample_stream = 0);

enum class PartitionMode { LabelSorted, Shuffled };

PartitionMode parse_partition_mode(const std::string& name);

struct DataPartition {
  std::vector<std::vector<std::size_t>> shards;  // sample indices per agent
  PartitionMode mode = PartitionMode::LabelSorted;
};

/// LabelSorted: if the number of distinct labels equals n, agent i receives
/// exactly the i-th smallest label; otherwise the label-sorted order (stable
/// in sample index) is cut into n contiguous blocks whose sizes differ by at
/// most one. Shuffled: seeded permutation cut into n such blocks.
/// Throws std::invalid_argument when n exceeds the sample count.
DataPartition partition_by_label(const std::vector<int>& labels, std::size_t n,
                                 PartitionMode mode, std::uint64_t seed = 0);

}  // namespace ticopd
