#pragma once

/**
 * @file source.hpp
 * @brief Where distributions come from.
 *
 * A distribution_source yields the next-token distribution for a given
 * token history. Sender and receiver must see bit-identical distributions,
 * so every implementation is a pure function of (configuration, seed,
 * history).
 *
 * This header also holds the synthetic corpus generator and the binary
 * corpus file format:
 *
 *     "LMD1" | version u16 | count u64 | count x record
 *     record := m u32 | m x (token_id u32, prob f64)
 *
 * All integers and floats are little-endian.
 */

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "llmstego/distribution.hpp"
#include "llmstego/errors.hpp"
#include "llmstego/random.hpp"

namespace llmstego {

class distribution_source {
 public:
  virtual ~distribution_source() = default;

  /// Distribution for the position following `history`, or nullopt at end of sequence.
  virtual std::optional<token_distribution> next(std::span<const token_id> history) = 0;
};

/// Replays a corpus in a seed-determined order. The history only matters
/// through its length, so the receiver gets the same distribution at the
/// same position.
class replay_source final : public distribution_source {
 public:
  replay_source(std::shared_ptr<const std::vector<token_distribution>> corpus, std::uint64_t seed)
      : corpus_(std::move(corpus)) {
    if (!corpus_ || corpus_->empty()) throw invalid_input("replay source needs a nonempty corpus");
    order_.resize(corpus_->size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    rng gen(seed);
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[gen.below(i)]);
  }

  std::optional<token_distribution> next(std::span<const token_id> history) override {
    if (history.size() >= order_.size()) return std::nullopt;
    return (*corpus_)[order_[history.size()]];
  }

  std::span<const std::size_t> order() const noexcept { return order_; }

 private:
  std::shared_ptr<const std::vector<token_distribution>> corpus_;
  std::vector<std::size_t> order_;
};

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

/// Parameters of the synthetic corpus. Defaults target the statistics of a
/// 7B chat model sampled at T = 1.1, top-p 0.95: ~40% point masses, nonzero
/// entropies with mean ~1.93 and median ~1.55 bits, and ~0.6% very wide
/// distributions that the 1024-entry filter removes.
struct synth_config {
  std::uint64_t seed = 1;
  double zero_entropy_prob = 0.40;

  // log(entropy) ~ Normal(log(median), sigma) for nonzero-entropy positions.
  double entropy_median = 1.55;
  double entropy_log_sigma = 0.662;

  // log2(support) = entropy + excess, excess ~ Exponential(mean).
  double support_excess_mean = 1.0;
  std::size_t max_support = 1024;

  // Wide, nearly flat distributions (removed by the corpus filter).
  double wide_prob = 0.006;
  double wide_support_mean = 5500.0;
  double wide_entropy_mean = 7.5;

  std::size_t vocab_size = 32000;
};

namespace detail {

/// Entropy (bits) of p_i proportional to r^i, i < m.
inline double geometric_entropy(double r, std::size_t m) {
  if (r >= 1.0) return std::log2(static_cast<double>(m));
  double norm = 0.0;
  double w = 1.0;
  double acc = 0.0;  // sum w_i * log2 w_i
  const double lr = std::log2(r);
  for (std::size_t i = 0; i < m; ++i) {
    norm += w;
    acc += w * static_cast<double>(i) * lr;
    w *= r;
    if (w == 0.0) break;
  }
  return std::log2(norm) - acc / norm;
}

/// Geometric-decay profile over m entries with the given entropy (bisection on the ratio).
inline std::vector<double> geometric_profile(double target_entropy, std::size_t m) {
  double lo = 0.0;
  double hi = 1.0;
  double r = 0.5;
  for (int it = 0; it < 200; ++it) {
    r = 0.5 * (lo + hi);
    const double h = geometric_entropy(r, m);
    if (std::abs(h - target_entropy) <= 1e-7) break;
    (h < target_entropy ? lo : hi) = r;
  }
  std::vector<double> p;
  p.reserve(m);
  double w = 1.0;
  for (std::size_t i = 0; i < m && w > 0.0; ++i) {
    p.push_back(w);
    w *= r;
  }
  double s = 0.0;
  for (double v : p) s += v;
  for (double& v : p) v /= s;
  return p;
}

inline token_distribution assign_tokens(const std::vector<double>& probs, std::size_t vocab, rng& gen) {
  std::vector<token_prob> entries;
  entries.reserve(probs.size());
  std::unordered_set<token_id> used;
  const std::size_t v = std::max(vocab, probs.size());
  for (double p : probs) {
    token_id t;
    do {
      t = static_cast<token_id>(gen.below(v));
    } while (!used.insert(t).second);
    entries.push_back({t, p});
  }
  std::sort(entries.begin(), entries.end(), descending_order);
  return token_distribution(std::move(entries));
}

}  // namespace detail

/// Deterministic in (config, n).
inline std::vector<token_distribution> generate_synthetic_corpus(const synth_config& cfg, std::size_t n) {
  if (n == 0) throw invalid_input("corpus size must be positive");
  if (cfg.max_support < 2) throw invalid_input("max_support must be at least 2");
  rng gen(cfg.seed);
  std::vector<token_distribution> corpus;
  corpus.reserve(n);
  const double max_entropy = std::log2(static_cast<double>(cfg.max_support));

  for (std::size_t i = 0; i < n; ++i) {
    const double u = gen.uniform();
    if (u < cfg.zero_entropy_prob) {
      corpus.push_back(detail::assign_tokens({1.0}, cfg.vocab_size, gen));
      continue;
    }
    if (u < cfg.zero_entropy_prob + cfg.wide_prob) {
      // Wide: support above the filter limit, entropy a little below log2(support).
      std::size_t m;
      do {
        m = static_cast<std::size_t>(cfg.wide_support_mean * std::exp(0.3 * gen.normal()));
      } while (m <= cfg.max_support || m > cfg.vocab_size);
      double target;
      do {
        target = cfg.wide_entropy_mean + 0.5 * gen.normal();
      } while (!(target > 0.5 && target < std::log2(static_cast<double>(m)) - 1e-3));
      corpus.push_back(detail::assign_tokens(detail::geometric_profile(target, m), cfg.vocab_size, gen));
      continue;
    }

    double target;
    do {
      target = cfg.entropy_median * std::exp(cfg.entropy_log_sigma * gen.normal());
    } while (!(target < max_entropy - 1e-3));

    std::size_t m = 0;
    for (;;) {
      const double excess = -cfg.support_excess_mean * std::log1p(-gen.uniform());
      const double want = std::min(std::exp2(target + excess), static_cast<double>(cfg.max_support));
      m = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(want)));
      if (std::log2(static_cast<double>(m)) > target + 1e-6) break;  // otherwise resample the support
    }
    corpus.push_back(detail::assign_tokens(detail::geometric_profile(target, m), cfg.vocab_size, gen));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Corpus file
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 4> corpus_magic{'L', 'M', 'D', '1'};
inline constexpr std::uint16_t corpus_version = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class byte_reader {
 public:
  explicit byte_reader(std::span<const std::uint8_t> data) : data_(data) {}

  template <typename T>
  T get(std::int64_t record) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    if (data_.size() - pos_ < sizeof(U)) throw corpus_format_error("truncated corpus file", pos_, record);
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(U{data_[pos_ + i]} << (8 * i));
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_corpus(std::span<const token_distribution> corpus) {
  std::vector<std::uint8_t> out(corpus_magic.begin(), corpus_magic.end());
  detail::put_le(out, corpus_version);
  detail::put_le(out, static_cast<std::uint64_t>(corpus.size()));
  for (const auto& d : corpus) {
    detail::put_le(out, static_cast<std::uint32_t>(d.size()));
    for (const auto& e : d.entries()) {
      detail::put_le(out, e.token);
      detail::put_le(out, e.prob);
    }
  }
  return out;
}

inline std::vector<token_distribution> parse_corpus(std::span<const std::uint8_t> data) {
  if (data.size() < 4 || !std::equal(corpus_magic.begin(), corpus_magic.end(), data.begin()))
    throw corpus_format_error("bad magic, expected LMD1", 0);
  detail::byte_reader in(data.subspan(4));
  const auto version = in.get<std::uint16_t>(-1);
  if (version != corpus_version)
    throw corpus_format_error("unsupported corpus version " + std::to_string(version), 4);
  const auto count = in.get<std::uint64_t>(-1);

  std::vector<token_distribution> corpus;
  corpus.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, in.remaining() / 4)));
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto rec = static_cast<std::int64_t>(r);
    const std::size_t record_offset = 4 + in.pos();
    const auto m = in.get<std::uint32_t>(rec);
    if (m == 0) throw corpus_format_error("empty record", record_offset, rec);
    if (in.remaining() / 12 < m) throw corpus_format_error("truncated record", record_offset, rec);
    std::vector<token_prob> entries(m);
    for (auto& e : entries) {
      e.token = in.get<std::uint32_t>(rec);
      e.prob = in.get<double>(rec);
    }
    try {
      corpus.emplace_back(std::move(entries));
    } catch (const invalid_input& ex) {
      throw corpus_format_error(std::string("invalid record: ") + ex.what(), record_offset, rec);
    }
  }
  if (in.remaining() != 0) throw corpus_format_error("trailing bytes after last record", 4 + in.pos());
  return corpus;
}

inline void write_corpus(std::span<const token_distribution> corpus, const std::string& path) {
  const auto bytes = serialize_corpus(corpus);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw error("write to " + path + " failed");
}

inline std::vector<token_distribution> read_corpus(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_corpus(bytes);
}

}  // namespace llmstego
