#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace ticopd {

/// What a random stream is used for. Part of the stream key so that two
/// consumers at the same (agent, iteration) never share draws.
enum class Purpose : std::uint32_t {
  Compression = 1,
  Initialization = 2,
  GraphSampling = 3,
  DataGeneration = 4,
  DataPartition = 5,
  ContractionTest = 6,
  Testing = 7,
};

/// Counter-based random stream keyed by (master seed, agent, iteration,
/// purpose, substep). Draw j of a stream is a pure function of the key and
/// j, so results do not depend on which thread evaluates an agent or in
/// what order.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t agent, std::uint64_t iteration,
            Purpose purpose, std::uint64_t substep = 0);

  /// Stream over a bare seed (purpose Testing, agent/iteration 0).
  explicit RngStream(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Fisher-Yates permutation of [0, n) driven by `rng`.
std::vector<std::size_t> random_permutation(std::size_t n, RngStream& rng);

}  // namespace ticopd
