#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "ticopd/compression.hpp"

using namespace ticopd;

namespace {

CompressorSpec qsgd(std::size_t d, int s) { return {CompressorKind::Qsgd, s, 1, d}; }

Eigen::VectorXd gaussian(std::size_t d, RngStream& rng) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  return x;
}

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a(i)) != std::bit_cast<std::uint64_t>(b(i))) return false;
  return true;
}

/// qsgd written out from its definition, reading one uniform per coordinate.
Eigen::VectorXd qsgd_reference(const Eigen::VectorXd& x, int s, RngStream& rng) {
  const double norm = x.norm();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  if (norm == 0.0) return out;
  const auto d = static_cast<double>(x.size());
  const double tau = 1.0 + std::min(d / (s * s), std::sqrt(d) / s);
  const double wire_norm = static_cast<double>(static_cast<float>(norm));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double level = std::min(std::floor(s * std::abs(x(i)) / norm + rng.uniform()), double(s));
    const double v = wire_norm / (s * tau) * level;
    out(i) = x(i) < 0 ? -v : v;
  }
  return out;
}

}  // namespace

TEST(Qsgd, ZeroMapsToZero) {
  RngStream rng(1);
  for (std::size_t d : {1u, 5u, 64u}) {
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    EXPECT_TRUE(qsgd_compress(z, 4, rng).isZero(0.0));
  }
  EXPECT_EQ(rng.draws(), 0u);
}

TEST(Qsgd, ScalarExample) {
  // d = 1, s = 1: tau = 2 and floor(1 + xi) = 1 for every xi in [0, 1).
  Eigen::VectorXd x(1);
  x << 3.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    RngStream rng(seed);
    EXPECT_EQ(qsgd_compress(x, 1, rng)(0), 1.5);
  }
}

TEST(Qsgd, TwoDimensionalLevelLaw) {
  // x = (3, 4), s = 1: level of x_1 is 1 with probability 3/5; E[Q(x)] = x / tau.
  Eigen::VectorXd x(2);
  x << 3.0, 4.0;
  const double tau = 1.0 + std::min(2.0, std::sqrt(2.0));
  const int trials = 20000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2), sum2 = Eigen::VectorXd::Zero(2);
  int ones = 0;
  for (int k = 0; k < trials; ++k) {
    RngStream rng(7, 0, static_cast<std::uint64_t>(k), Purpose::Testing);
    const Eigen::VectorXd q = qsgd_compress(x, 1, rng);
    EXPECT_TRUE(q(0) == 0.0 || std::abs(q(0) - 5.0 / tau) < 1e-12);
    ones += q(0) != 0.0;
    sum += q;
    sum2 += q.cwiseProduct(q);
  }
  const double p = static_cast<double>(ones) / trials;
  EXPECT_NEAR(p, 0.6, 3 * std::sqrt(0.6 * 0.4 / trials));
  const Eigen::VectorXd mean = sum / trials;
  for (Eigen::Index i = 0; i < 2; ++i) {
    const double se = std::sqrt((sum2(i) / trials - mean(i) * mean(i)) / trials);
    EXPECT_NEAR(mean(i), x(i) / tau, 3 * se);
  }
}

TEST(Qsgd, MatchesDefinitionBitwise) {
  for (auto [d, s] : {std::pair<std::size_t, int>{1, 1}, {7, 2}, {16, 4}, {100, 15}}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      RngStream gen(seed, d, 0, Purpose::Testing);
      const Eigen::VectorXd x = gaussian(d, gen);
      RngStream a(seed, 1, 2, Purpose::Compression), b(seed, 1, 2, Purpose::Compression);
      EXPECT_TRUE(bitwise_equal(qsgd_compress(x, s, a), qsgd_reference(x, s, b)));
    }
  }
}

TEST(Qsgd, MeanIsScaledInput) {
  RngStream gen(3);
  const Eigen::VectorXd x = gaussian(16, gen);
  const int s = 4, trials = 20000;
  const double tau = qsgd_tau(16, s);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(16), sum2 = Eigen::VectorXd::Zero(16);
  for (int k = 0; k < trials; ++k) {
    RngStream rng(11, 0, static_cast<std::uint64_t>(k), Purpose::Testing);
    const Eigen::VectorXd q = qsgd_compress(x, s, rng);
    sum += q;
    sum2 += q.cwiseProduct(q);
  }
  // The float-rounded norm shifts the mean by at most ~6e-8 relative.
  const double wire = static_cast<double>(static_cast<float>(x.norm())) / x.norm();
  for (Eigen::Index i = 0; i < 16; ++i) {
    const double mean = sum(i) / trials;
    const double se = std::sqrt(std::max(sum2(i) / trials - mean * mean, 0.0) / trials);
    EXPECT_NEAR(mean, wire * x(i) / tau, 3 * se + 1e-12);
  }
}

TEST(Qsgd, RejectsNonFinite) {
  Eigen::VectorXd x(2);
  x << 1.0, std::nan("");
  RngStream rng(1);
  EXPECT_THROW(qsgd_compress(x, 2, rng), std::invalid_argument);
  EXPECT_THROW(encode(x, qsgd(2, 2), rng), std::invalid_argument);
}

TEST(Delta, CertifiedValues) {
  EXPECT_DOUBLE_EQ(certified_delta(qsgd(1, 1)), 0.25);
  EXPECT_DOUBLE_EQ(certified_delta({CompressorKind::Identity, 1, 1, 9}), 1.0);
  EXPECT_DOUBLE_EQ(certified_delta({CompressorKind::RandK, 1, 8, 8}), 1.0);
  EXPECT_DOUBLE_EQ(certified_delta({CompressorKind::TopK, 1, 1, 2}), 1.0 - std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(certified_delta(qsgd(16, 4)), 1.0 / (2.0 * (1.0 + 1.0)));
}

TEST(Spec, Validation) {
  EXPECT_THROW(qsgd(4, 0).validate(), std::invalid_argument);
  EXPECT_THROW((CompressorSpec{CompressorKind::TopK, 1, 0, 4}).validate(), std::invalid_argument);
  EXPECT_THROW((CompressorSpec{CompressorKind::RandK, 1, 5, 4}).validate(), std::invalid_argument);
  EXPECT_THROW(qsgd(0, 2).validate(), std::invalid_argument);
  EXPECT_NO_THROW(qsgd(4, 3).validate());
}

TEST(Codec, BitLengths) {
  EXPECT_EQ(message_bits(qsgd(1, 1)), 34u);
  EXPECT_EQ(message_bits(qsgd(4, 3)), 44u);
  EXPECT_EQ(message_bits({CompressorKind::Identity, 1, 1, 3}), 96u);
  EXPECT_EQ(message_bits(qsgd(100, 4)), 100u * 3 + 100 + 32);
  for (std::size_t d : {1u, 3u, 16u, 33u})
    for (int s = 1; s < 40; ++s)
      EXPECT_EQ(message_bits(qsgd(d, s)),
                d * static_cast<std::size_t>(std::ceil(std::log2(s + 1.0))) + d + 32);
}

TEST(Codec, ScalarPayloadLayout) {
  Eigen::VectorXd x(1);
  x << 3.0;
  RngStream rng(5);
  const EncodedMessage m = encode(x, qsgd(1, 1), rng);
  EXPECT_EQ(m.bit_length, 34u);
  ASSERT_EQ(m.payload.size(), 5u);
  // level 1, sign 0, then 3.0f = 0x40400000, all MSB first.
  const std::uint32_t f = std::bit_cast<std::uint32_t>(3.0f);
  std::uint64_t bits = 0;
  for (auto byte : m.payload) bits = (bits << 8) | byte;
  const std::uint64_t expected = ((std::uint64_t{0b10} << 32) | f) << 6;
  EXPECT_EQ(bits, expected);
  EXPECT_EQ(decode(m)(0), 1.5);
}

TEST(Codec, ZeroMessageRoundTrip) {
  RngStream rng(5);
  const auto m = encode(Eigen::VectorXd::Zero(8), qsgd(8, 3), rng);
  EXPECT_TRUE(decode(m).isZero(0.0));
}

TEST(Codec, RoundTripMatchesCompressBitwise) {
  const std::vector<CompressorSpec> specs{qsgd(16, 4),
                                          qsgd(5, 1),
                                          qsgd(64, 255),
                                          {CompressorKind::TopK, 1, 4, 16},
                                          {CompressorKind::RandK, 1, 4, 16},
                                          {CompressorKind::Identity, 1, 1, 16}};
  for (const auto& spec : specs) {
    for (std::uint64_t k = 0; k < 1000; ++k) {
      RngStream gen(k, 0, 0, Purpose::Testing, spec.d);
      const Eigen::VectorXd x = gaussian(spec.d, gen) * std::exp(gen.normal());
      RngStream a(9, 3, k, Purpose::Compression), b(9, 3, k, Purpose::Compression);
      const EncodedMessage m = encode(x, spec, a);
      ASSERT_TRUE(bitwise_equal(decode(m), compress(spec, x, b))) << spec.describe();
      EXPECT_EQ(a.draws(), b.draws());
      EXPECT_EQ(m.bit_length, message_bits(spec));
    }
  }
}

TEST(Codec, IdentityIsLossless) {
  RngStream gen(2);
  const Eigen::VectorXd x = gaussian(10, gen);
  RngStream rng(1);
  EXPECT_TRUE(bitwise_equal(decode(encode(x, {CompressorKind::Identity, 1, 1, 10}, rng)), x));
}

TEST(Codec, PayloadsAreDeterministic) {
  RngStream gen(4);
  const Eigen::VectorXd x = gaussian(32, gen);
  RngStream a(77, 2, 5, Purpose::Compression), b(77, 2, 5, Purpose::Compression);
  EXPECT_EQ(encode(x, qsgd(32, 4), a).payload, encode(x, qsgd(32, 4), b).payload);
}

TEST(Codec, RejectsMalformedPayloads) {
  RngStream gen(4);
  const Eigen::VectorXd x = gaussian(6, gen);
  RngStream rng(1);
  const EncodedMessage good = encode(x, qsgd(6, 2), rng);

  EncodedMessage truncated = good;
  truncated.payload.pop_back();
  EXPECT_THROW(decode(truncated), std::runtime_error);

  EncodedMessage wrong_length = good;
  wrong_length.bit_length += 1;
  EXPECT_THROW(decode(wrong_length), std::runtime_error);

  EncodedMessage bad_level = good;  // s = 2 uses 2-bit levels; 3 is out of range
  bad_level.payload[0] |= 0xC0;
  EXPECT_THROW(decode(bad_level), std::runtime_error);

  EncodedMessage bad_norm = good;  // exponent all ones: NaN or infinity
  const std::size_t norm_start = 6 * 2 + 6;
  for (std::size_t b = norm_start + 1; b < norm_start + 9; ++b)
    bad_norm.payload[b / 8] |= static_cast<std::uint8_t>(0x80 >> (b % 8));
  EXPECT_THROW(decode(bad_norm), std::runtime_error);
}

TEST(Sparsifiers, TopKTiesGoToLowerIndex) {
  Eigen::VectorXd x(4);
  x << 1.0, -2.0, 2.0, 0.5;
  Eigen::VectorXd expected(4);
  expected << 0.0, -2.0, 0.0, 0.0;
  EXPECT_EQ(topk_compress(x, 1), expected);
}

TEST(Sparsifiers, RandKKeepsValuesUnscaled) {
  RngStream gen(8);
  const Eigen::VectorXd x = gaussian(20, gen);
  RngStream rng(3);
  const Eigen::VectorXd q = randk_compress(x, 5, rng);
  int kept = 0;
  for (Eigen::Index i = 0; i < 20; ++i) {
    if (q(i) != 0.0) {
      EXPECT_EQ(q(i), x(i));
      ++kept;
    }
  }
  EXPECT_EQ(kept, 5);
}

TEST(Contraction, HandExamples) {
  RngStream rng(1);
  const auto id = contraction_test({CompressorKind::Identity, 1, 1, 4}, 1000, rng);
  EXPECT_EQ(id.mean_ratio, 0.0);
  EXPECT_TRUE(id.pass);

  Eigen::VectorXd one(1);
  one << 1.0;
  const auto q = contraction_test(qsgd(1, 1), one, 1000, rng);
  EXPECT_DOUBLE_EQ(q.mean_ratio, 0.25);
  EXPECT_DOUBLE_EQ(q.bound, 9.0 / 16.0);
  EXPECT_TRUE(q.pass);

  Eigen::VectorXd diag(2);
  diag << 1.0, 1.0;
  diag /= std::sqrt(2.0);
  const auto t = contraction_test({CompressorKind::TopK, 1, 1, 2}, diag, 1000, rng);
  EXPECT_NEAR(t.mean_ratio, 0.5, 1e-15);
  EXPECT_NEAR(t.bound, 0.5, 1e-15);
  EXPECT_TRUE(t.pass);
}

TEST(Contraction, RequiresEnoughTrials) {
  RngStream rng(1);
  EXPECT_THROW(contraction_test(qsgd(4, 2), 999, rng), std::invalid_argument);
}
