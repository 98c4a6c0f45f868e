#include "ticopd/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace ticopd {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t agent, std::uint64_t iteration,
                     Purpose purpose, std::uint64_t substep) {
  std::uint64_t h = mix64(master_seed + kGolden);
  h = mix64(h ^ (agent + 0x1000193ULL * kGolden));
  h = mix64(h ^ (iteration + 0x2545F491ULL * kGolden));
  h = mix64(h ^ (static_cast<std::uint64_t>(purpose) + 0x51ED27ULL * kGolden));
  h = mix64(h ^ (substep + 0x7F4A7C15ULL * kGolden));
  base_ = h;
}

RngStream::RngStream(std::uint64_t seed) : RngStream(seed, 0, 0, Purpose::Testing, 0) {}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  return mix64(base_ + counter_ * kGolden);
}

double RngStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

std::uint64_t RngStream::below(std::uint64_t bound) {
  // Rejection on the top of the range keeps the result unbiased.
  const std::uint64_t limit = max() - max() % bound;
  std::uint64_t x = (*this)();
  while (x >= limit) x = (*this)();
  return x % bound;
}

std::vector<std::size_t> random_permutation(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

}  // namespace ticopd
