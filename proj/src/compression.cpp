#include "ticopd/compression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ticopd {

namespace {

class BitWriter {
 public:
  void put(std::uint64_t value, int width) {
    for (int b = width - 1; b >= 0; --b) put_bit(((value >> b) & 1U) != 0);
  }
  void put_bit(bool bit) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80U >> (bits_ % 8));
    ++bits_;
  }
  std::size_t bits() const { return bits_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint64_t get(int width) {
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v = (v << 1) | (get_bit() ? 1U : 0U);
    return v;
  }
  bool get_bit() {
    if (pos_ >= bytes_.size() * 8) throw std::runtime_error("truncated payload");
    const bool bit = (bytes_[pos_ / 8] & (0x80U >> (pos_ % 8))) != 0;
    ++pos_;
    return bit;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

int index_bits(std::size_t d) {
  return d <= 1 ? 0 : static_cast<int>(std::bit_width(d - 1));
}

void require_finite(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (!x.allFinite()) throw std::invalid_argument("compressor input is not finite");
}

struct QsgdSymbols {
  std::vector<std::uint32_t> levels;
  std::vector<bool> negative;
  float norm = 0.0f;
};

QsgdSymbols qsgd_symbols(const Eigen::Ref<const Eigen::VectorXd>& x, int s, RngStream& rng) {
  require_finite(x);
  const auto d = static_cast<std::size_t>(x.size());
  QsgdSymbols sym{std::vector<std::uint32_t>(d, 0), std::vector<bool>(d, false), 0.0f};
  const double norm = x.norm();
  if (norm == 0.0) return sym;
  sym.norm = static_cast<float>(norm);
  if (!std::isfinite(sym.norm)) throw std::invalid_argument("norm exceeds binary32 range");
  const auto levels = static_cast<double>(s);
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = x(static_cast<Eigen::Index>(i));
    const double u = levels * std::abs(xi) / norm + rng.uniform();
    const double level = std::min(std::floor(u), levels);
    sym.levels[i] = static_cast<std::uint32_t>(level);
    sym.negative[i] = xi < 0.0;
  }
  return sym;
}

Eigen::VectorXd qsgd_reconstruct(const QsgdSymbols& sym, int s) {
  const auto d = sym.levels.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(d));
  const double scale = static_cast<double>(sym.norm) / (static_cast<double>(s) * qsgd_tau(d, s));
  for (std::size_t i = 0; i < d; ++i) {
    double v = scale * static_cast<double>(sym.levels[i]);
    out(static_cast<Eigen::Index>(i)) = sym.negative[i] ? -v : v;
  }
  return out;
}

std::vector<std::size_t> topk_indices(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t k) {
  std::vector<std::size_t> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(x(static_cast<Eigen::Index>(a))) > std::abs(x(static_cast<Eigen::Index>(b)));
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> randk_indices(std::size_t d, std::size_t k, RngStream& rng) {
  std::vector<std::size_t> pool(d);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(d - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Eigen::VectorXd keep_only(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const std::vector<std::size_t>& idx) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (auto i : idx) out(static_cast<Eigen::Index>(i)) = x(static_cast<Eigen::Index>(i));
  return out;
}

void put_double(BitWriter& w, double v) { w.put(std::bit_cast<std::uint64_t>(v), 64); }
double get_double(BitReader& r) { return std::bit_cast<double>(r.get(64)); }

}  // namespace

CompressorKind parse_compressor_kind(const std::string& name) {
  if (name == "qsgd") return CompressorKind::Qsgd;
  if (name == "topk") return CompressorKind::TopK;
  if (name == "randk") return CompressorKind::RandK;
  if (name == "identity") return CompressorKind::Identity;
  throw std::invalid_argument("unknown compressor kind: " + name);
}

std::string to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::Qsgd: return "qsgd";
    case CompressorKind::TopK: return "topk";
    case CompressorKind::RandK: return "randk";
    case CompressorKind::Identity: return "identity";
  }
  return "unknown";
}

void CompressorSpec::validate() const {
  if (d < 1) throw std::invalid_argument("compressor dimension must be >= 1");
  switch (kind) {
    case CompressorKind::Qsgd:
      if (s < 1) throw std::invalid_argument("qsgd needs s >= 1");
      if (s > (1 << 30)) throw std::invalid_argument("qsgd s too large");
      break;
    case CompressorKind::TopK:
    case CompressorKind::RandK:
      if (k < 1 || k > d) throw std::invalid_argument("sparsifier needs 1 <= k <= d");
      break;
    case CompressorKind::Identity:
      break;
  }
}

std::string CompressorSpec::describe() const {
  switch (kind) {
    case CompressorKind::Qsgd: return "qsgd(s=" + std::to_string(s) + ",d=" + std::to_string(d) + ")";
    case CompressorKind::TopK: return "topk(k=" + std::to_string(k) + ",d=" + std::to_string(d) + ")";
    case CompressorKind::RandK: return "randk(k=" + std::to_string(k) + ",d=" + std::to_string(d) + ")";
    case CompressorKind::Identity: return "identity(d=" + std::to_string(d) + ")";
  }
  return "unknown";
}

double qsgd_tau(std::size_t d, int s) {
  const auto dd = static_cast<double>(d);
  const auto ss = static_cast<double>(s);
  return 1.0 + std::min(dd / (ss * ss), std::sqrt(dd) / ss);
}

double certified_delta(const CompressorSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case CompressorKind::Qsgd: return 1.0 / (2.0 * qsgd_tau(spec.d, spec.s));
    case CompressorKind::TopK:
    case CompressorKind::RandK:
      return 1.0 - std::sqrt(1.0 - static_cast<double>(spec.k) / static_cast<double>(spec.d));
    case CompressorKind::Identity: return 1.0;
  }
  return 1.0;
}

int qsgd_level_bits(int s) {
  return static_cast<int>(std::bit_width(static_cast<unsigned>(s)));
}

std::size_t message_bits(const CompressorSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case CompressorKind::Qsgd:
      return spec.d * static_cast<std::size_t>(qsgd_level_bits(spec.s)) + spec.d + 32;
    case CompressorKind::TopK:
    case CompressorKind::RandK:
      return spec.k * (static_cast<std::size_t>(index_bits(spec.d)) + kFloatBits);
    case CompressorKind::Identity: return spec.d * kFloatBits;
  }
  return 0;
}

Eigen::VectorXd qsgd_compress(const Eigen::Ref<const Eigen::VectorXd>& x, int s, RngStream& rng) {
  if (s < 1) throw std::invalid_argument("qsgd needs s >= 1");
  return qsgd_reconstruct(qsgd_symbols(x, s, rng), s);
}

Eigen::VectorXd topk_compress(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t k) {
  require_finite(x);
  if (k < 1 || k > static_cast<std::size_t>(x.size()))
    throw std::invalid_argument("top-k needs 1 <= k <= d");
  return keep_only(x, topk_indices(x, k));
}

Eigen::VectorXd randk_compress(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t k,
                               RngStream& rng) {
  require_finite(x);
  const auto d = static_cast<std::size_t>(x.size());
  if (k < 1 || k > d) throw std::invalid_argument("random-k needs 1 <= k <= d");
  return keep_only(x, randk_indices(d, k, rng));
}

Eigen::VectorXd compress(const CompressorSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                         RngStream& rng) {
  if (static_cast<std::size_t>(x.size()) != spec.d)
    throw std::invalid_argument("dimension mismatch: vector " + std::to_string(x.size()) +
                                ", compressor " + std::to_string(spec.d));
  switch (spec.kind) {
    case CompressorKind::Qsgd: return qsgd_compress(x, spec.s, rng);
    case CompressorKind::TopK: return topk_compress(x, spec.k);
    case CompressorKind::RandK: return randk_compress(x, spec.k, rng);
    case CompressorKind::Identity:
      require_finite(x);
      return x;
  }
  return x;
}

EncodedMessage encode(const Eigen::Ref<const Eigen::VectorXd>& x, const CompressorSpec& spec,
                      RngStream& rng) {
  spec.validate();
  if (static_cast<std::size_t>(x.size()) != spec.d)
    throw std::invalid_argument("dimension mismatch: vector " + std::to_string(x.size()) +
                                ", compressor " + std::to_string(spec.d));
  require_finite(x);
  BitWriter w;
  switch (spec.kind) {
    case CompressorKind::Qsgd: {
      const auto sym = qsgd_symbols(x, spec.s, rng);
      const int width = qsgd_level_bits(spec.s);
      for (auto level : sym.levels) w.put(level, width);
      for (bool neg : sym.negative) w.put_bit(neg);
      w.put(std::bit_cast<std::uint32_t>(sym.norm), 32);
      break;
    }
    case CompressorKind::TopK:
    case CompressorKind::RandK: {
      const auto idx = spec.kind == CompressorKind::TopK ? topk_indices(x, spec.k)
                                                         : randk_indices(spec.d, spec.k, rng);
      const int width = index_bits(spec.d);
      for (auto i : idx) w.put(i, width);
      for (auto i : idx) put_double(w, x(static_cast<Eigen::Index>(i)));
      break;
    }
    case CompressorKind::Identity:
      for (Eigen::Index i = 0; i < x.size(); ++i) put_double(w, x(i));
      break;
  }
  return EncodedMessage{w.take(), message_bits(spec), spec};
}

namespace {

std::size_t payload_bits(const CompressorSpec& spec) {
  switch (spec.kind) {
    case CompressorKind::Qsgd: return message_bits(spec);
    case CompressorKind::TopK:
    case CompressorKind::RandK: return spec.k * (static_cast<std::size_t>(index_bits(spec.d)) + 64);
    case CompressorKind::Identity: return spec.d * 64;
  }
  return 0;
}

}  // namespace

Eigen::VectorXd decode(const EncodedMessage& message) {
  const auto& spec = message.scheme;
  spec.validate();
  const std::size_t expected_bits = payload_bits(spec);
  if (message.payload.size() != (expected_bits + 7) / 8)
    throw std::runtime_error("payload size " + std::to_string(message.payload.size()) +
                             " bytes does not match " + spec.describe());
  if (message.bit_length != message_bits(spec))
    throw std::runtime_error("declared bit length does not match " + spec.describe());
  BitReader r(message.payload);
  switch (spec.kind) {
    case CompressorKind::Qsgd: {
      QsgdSymbols sym{std::vector<std::uint32_t>(spec.d), std::vector<bool>(spec.d), 0.0f};
      const int width = qsgd_level_bits(spec.s);
      for (auto& level : sym.levels) {
        level = static_cast<std::uint32_t>(r.get(width));
        if (level > static_cast<std::uint32_t>(spec.s))
          throw std::runtime_error("qsgd level out of range");
      }
      for (std::size_t i = 0; i < spec.d; ++i) sym.negative[i] = r.get_bit();
      sym.norm = std::bit_cast<float>(static_cast<std::uint32_t>(r.get(32)));
      if (!std::isfinite(sym.norm) || sym.norm < 0.0f)
        throw std::runtime_error("qsgd norm field is invalid");
      return qsgd_reconstruct(sym, spec.s);
    }
    case CompressorKind::TopK:
    case CompressorKind::RandK: {
      const int width = index_bits(spec.d);
      std::vector<std::size_t> idx(spec.k);
      for (auto& i : idx) {
        i = static_cast<std::size_t>(r.get(width));
        if (i >= spec.d) throw std::runtime_error("sparse index out of range");
      }
      Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.d));
      for (auto i : idx) out(static_cast<Eigen::Index>(i)) = get_double(r);
      return out;
    }
    case CompressorKind::Identity: {
      Eigen::VectorXd out(static_cast<Eigen::Index>(spec.d));
      for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = get_double(r);
      return out;
    }
  }
  throw std::runtime_error("unknown scheme");
}

namespace {

ContractionReport summarize(const std::vector<double>& ratios, double bound) {
  ContractionReport rep;
  rep.trials = ratios.size();
  const double n = static_cast<double>(ratios.size());
  rep.mean_ratio = std::accumulate(ratios.begin(), ratios.end(), 0.0) / n;
  double ss = 0.0;
  for (double r : ratios) ss += (r - rep.mean_ratio) * (r - rep.mean_ratio);
  rep.std_error = std::sqrt(ss / (n - 1.0) / n);
  rep.bound = bound;
  rep.pass = rep.mean_ratio <= bound + 3.0 * rep.std_error;
  return rep;
}

void require_trials(std::size_t trials) {
  if (trials < 1000) throw std::invalid_argument("contraction test needs at least 1000 trials");
}

}  // namespace

ContractionReport contraction_test(const CompressorSpec& spec, std::size_t trials,
                                   RngStream& rng) {
  require_trials(trials);
  const double delta = certified_delta(spec);
  std::vector<double> ratios;
  ratios.reserve(trials);
  Eigen::VectorXd x(static_cast<Eigen::Index>(spec.d));
  for (std::size_t t = 0; t < trials; ++t) {
    do {
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    } while (x.norm() == 0.0);
    x /= x.norm();
    ratios.push_back((compress(spec, x, rng) - x).squaredNorm() / x.squaredNorm());
  }
  return summarize(ratios, (1.0 - delta) * (1.0 - delta));
}

ContractionReport contraction_test(const CompressorSpec& spec,
                                   const Eigen::Ref<const Eigen::VectorXd>& x,
                                   std::size_t trials, RngStream& rng) {
  require_trials(trials);
  const double norm2 = x.squaredNorm();
  if (norm2 == 0.0) throw std::invalid_argument("contraction test needs a nonzero vector");
  const double delta = certified_delta(spec);
  std::vector<double> ratios;
  ratios.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t)
    ratios.push_back((compress(spec, x, rng) - x).squaredNorm() / norm2);
  return summarize(ratios, (1.0 - delta) * (1.0 - delta));
}

}  // namespace ticopd
