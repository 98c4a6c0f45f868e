#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ticopd/rng.hpp"

namespace ticopd {

enum class CompressorKind { Qsgd, TopK, RandK, Identity };

CompressorKind parse_compressor_kind(const std::string& name);
std::string to_string(CompressorKind kind);

struct CompressorSpec {
  CompressorKind kind = CompressorKind::Identity;
  int s = 1;          // qsgd precision levels
  std::size_t k = 1;  // kept coordinates for top-k / random-k
  std::size_t d = 1;  // vector dimension

  /// Throws std::invalid_argument if the parameters are out of range.
  void validate() const;
  /// Identity is the only lossless operator.
  bool lossless() const { return kind == CompressorKind::Identity; }
  std::string describe() const;
};

/// tau = 1 + min(d / s^2, sqrt(d) / s), the qsgd variance-scaling factor.
double qsgd_tau(std::size_t d, int s);

/// Contraction factor delta in (0, 1] such that
/// E||Q(x) - x||^2 <= (1 - delta)^2 ||x||^2.
double certified_delta(const CompressorSpec& spec);

/// Bits used to carry one qsgd level in {0, ..., s}.
int qsgd_level_bits(int s);

/// Closed-form length of a message on the wire.
std::size_t message_bits(const CompressorSpec& spec);

/// Bits accounted for one uncompressed real number.
inline constexpr std::size_t kFloatBits = 32;

/// Randomized quantizer
///   sign(x) * ||x|| / (s tau) * floor(s |x| / ||x|| + xi),  xi ~ U[0,1)^d.
/// ||x|| is rounded to binary32 before scaling so the result equals what a
/// receiver reconstructs from the wire. Zero input maps to zero.
Eigen::VectorXd qsgd_compress(const Eigen::Ref<const Eigen::VectorXd>& x, int s, RngStream& rng);

/// Largest-magnitude k coordinates, ties to the lower index.
Eigen::VectorXd topk_compress(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t k);

/// k coordinates drawn uniformly without replacement, kept unscaled.
Eigen::VectorXd randk_compress(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t k,
                               RngStream& rng);

/// Dispatch on spec.kind.
Eigen::VectorXd compress(const CompressorSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                         RngStream& rng);

struct EncodedMessage {
  std::vector<std::uint8_t> payload;
  /// Bits charged to the channel. For qsgd this is the exact payload
  /// length; raw reals are charged kFloatBits each.
  std::size_t bit_length = 0;
  CompressorSpec scheme;
};

/// Serializes Q(x). Consumes randomness from `rng` exactly as compress().
EncodedMessage encode(const Eigen::Ref<const Eigen::VectorXd>& x, const CompressorSpec& spec,
                      RngStream& rng);

/// Inverse of encode(). Throws std::runtime_error on a malformed payload.
Eigen::VectorXd decode(const EncodedMessage& message);

struct ContractionReport {
  std::size_t trials = 0;
  double mean_ratio = 0.0;  // mean of ||Q(x) - x||^2 / ||x||^2
  double std_error = 0.0;
  double bound = 0.0;  // (1 - certified delta)^2
  bool pass = false;
};

/// Monte-Carlo check of the contraction inequality on random unit vectors.
/// Requires trials >= 1000.
ContractionReport contraction_test(const CompressorSpec& spec, std::size_t trials,
                                   RngStream& rng);

/// Same check on a fixed nonzero vector.
ContractionReport contraction_test(const CompressorSpec& spec,
                                   const Eigen::Ref<const Eigen::VectorXd>& x,
                                   std::size_t trials, RngStream& rng);

}  // namespace ticopd
