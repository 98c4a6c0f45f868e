#include "ticopd/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "ticopd/rng.hpp"

namespace ticopd {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("truncated IDX header: " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

IdxHeader parse_header(std::istream& in, const std::filesystem::path& path) {
  IdxHeader h;
  h.magic = read_be32(in, path);
  if ((h.magic & 0xFFFFFF00U) != 0x00000800U)
    throw std::runtime_error("bad IDX magic in " + path.string());
  const auto ndim = h.magic & 0xFFU;
  for (std::uint32_t k = 0; k < ndim; ++k) h.dims.push_back(read_be32(in, path));
  return h;
}

std::vector<std::size_t> block_sizes(std::size_t total, std::size_t n) {
  std::vector<std::size_t> sizes(n, total / n);
  for (std::size_t i = 0; i < total % n; ++i) ++sizes[i];
  return sizes;
}

std::vector<std::vector<std::size_t>> cut_blocks(const std::vector<std::size_t>& order,
                                                 std::size_t n) {
  std::vector<std::vector<std::size_t>> shards(n);
  std::size_t pos = 0;
  const auto sizes = block_sizes(order.size(), n);
  for (std::size_t i = 0; i < n; ++i) {
    shards[i].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                     order.begin() + static_cast<std::ptrdiff_t>(pos + sizes[i]));
    pos += sizes[i];
  }
  return shards;
}

}  // namespace

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.features.resize(data.features.rows(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.features.col(static_cast<Eigen::Index>(k)) =
        data.features.col(static_cast<Eigen::Index>(indices[k]));
    out.labels.push_back(data.labels[indices[k]]);
  }
  return out;
}

Dataset with_bias_feature(const Dataset& data) {
  Dataset out = data;
  out.features.conservativeResize(data.features.rows() + 1, Eigen::NoChange);
  out.features.row(data.features.rows()).setOnes();
  return out;
}

IdxHeader read_idx_header(const std::filesystem::path& path) {
  auto in = open_binary(path);
  return parse_header(in, path);
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t limit) {
  auto img_in = open_binary(images);
  auto lbl_in = open_binary(labels);
  const auto img = parse_header(img_in, images);
  const auto lbl = parse_header(lbl_in, labels);
  if (img.magic != kImageMagic || img.dims.size() != 3)
    throw std::runtime_error("bad IDX image magic in " + images.string());
  if (lbl.magic != kLabelMagic || lbl.dims.size() != 1)
    throw std::runtime_error("bad IDX label magic in " + labels.string());
  if (img.dims[0] != lbl.dims[0])
    throw std::runtime_error("IDX sample count mismatch: " + std::to_string(img.dims[0]) +
                             " images, " + std::to_string(lbl.dims[0]) + " labels");

  std::size_t count = img.dims[0];
  if (limit > 0) count = std::min(count, limit);
  const std::size_t pixels = std::size_t{img.dims[1]} * img.dims[2];

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(count));
  std::vector<unsigned char> buf(pixels);
  for (std::size_t j = 0; j < count; ++j) {
    if (!img_in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
      throw std::runtime_error("truncated IDX image data in " + images.string());
    for (std::size_t p = 0; p < pixels; ++p)
      data.features(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = buf[p] / 255.0;
  }
  std::vector<unsigned char> lab(count);
  if (!lbl_in.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(count)))
    throw std::runtime_error("truncated IDX label data in " + labels.string());
  data.labels.assign(lab.begin(), lab.end());
  data.num_classes = count == 0 ? 0 : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  return data;
}

Dataset make_gaussian_classes(int classes, std::size_t features, std::size_t per_class,
                              double separation, double noise, std::uint64_t seed,
                              std::uint64_t sample_stream) {
  if (classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (features < 1 || per_class < 1) throw std::invalid_argument("empty synthetic dataset");
  const auto p = static_cast<Eigen::Index>(features);
  Eigen::MatrixXd means(p, classes);
  RngStream mean_rng(seed, 0, 0, Purpose::DataGeneration, 0);
  for (int c = 0; c < classes; ++c) {
    for (Eigen::Index r = 0; r < p; ++r) means(r, c) = mean_rng.normal();
    means.col(c) *= separation / means.col(c).norm();
  }
  Dataset data;
  data.num_classes = classes;
  data.features.resize(p, static_cast<Eigen::Index>(per_class) * classes);
  RngStream rng(seed, 0, 0, Purpose::DataGeneration, 1 + sample_stream);
  Eigen::Index col = 0;
  for (int c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++col) {
      for (Eigen::Index r = 0; r < p; ++r) data.features(r, col) = means(r, c) + noise * rng.normal();
      data.labels.push_back(c);
    }
  }
  return data;
}

PartitionMode parse_partition_mode(const std::string& name) {
  if (name == "label_sorted") return PartitionMode::LabelSorted;
  if (name == "shuffled") return PartitionMode::Shuffled;
  throw std::invalid_argument("unknown partition mode: " + name);
}

DataPartition partition_by_label(const std::vector<int>& labels, std::size_t n,
                                 PartitionMode mode, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("need at least one agent");
  if (n > labels.size())
    throw std::invalid_argument("more agents (" + std::to_string(n) + ") than samples (" +
                                std::to_string(labels.size()) + ")");
  DataPartition part;
  part.mode = mode;
  if (mode == PartitionMode::Shuffled) {
    RngStream rng(seed, 0, 0, Purpose::DataPartition, 0);
    part.shards = cut_blocks(random_permutation(labels.size(), rng), n);
    return part;
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() == n) {
    part.shards.assign(n, {});
    std::size_t agent = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (k > 0 && labels[order[k]] != labels[order[k - 1]]) ++agent;
      part.shards[agent].push_back(order[k]);
    }
  } else {
    part.shards = cut_blocks(order, n);
  }
  return part;
}

}  // namespace ticopd
