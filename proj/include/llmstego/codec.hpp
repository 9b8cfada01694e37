#pragma once

/**
 * @file codec.hpp
 * @brief Embedding bits in token choices and reading them back.
 *
 * encode_token walks down a chain of balanced partitions, letting each
 * message bit pick a half, and samples honestly from whatever set is left
 * when no acceptable split exists. decode_token repeats the same chain of
 * partitions and reports which half contained the observed token.
 *
 * Messages are framed as a 32-bit big-endian byte length followed by the
 * payload, and the whole frame is XORed with an AES-128-CTR keystream so
 * the embedded bits look uniform.
 */

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "llmstego/distribution.hpp"
#include "llmstego/errors.hpp"
#include "llmstego/keystream.hpp"
#include "llmstego/partition.hpp"
#include "llmstego/random.hpp"
#include "llmstego/source.hpp"

namespace llmstego {

/// Read position over a sequence of 0/1 bits.
class bit_cursor {
 public:
  bit_cursor() = default;
  explicit bit_cursor(std::span<const std::uint8_t> bits) : bits_(bits) {}

  bool empty() const noexcept { return pos_ >= bits_.size(); }
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bits_.size() - pos_; }
  std::uint8_t take() { return bits_[pos_++] & 1U; }

 private:
  std::span<const std::uint8_t> bits_;
  std::size_t pos_ = 0;
};

struct token_record {
  std::size_t position = 0;
  token_id token = 0;
  std::size_t bits_embedded = 0;

  friend bool operator==(const token_record&, const token_record&) = default;
};

/// Inverse-CDF draw from `set` using one uniform variate.
inline token_id sample_from(const prob_subset& set, double u) {
  const auto items = set.items();
  const double target = u * set.total();
  double acc = 0.0;
  for (const auto& e : items) {
    acc += e.prob;
    if (target < acc) return e.token;
  }
  return items.back().token;
}

/// Embeds as many bits from `bits` as the partition chain allows, then
/// samples the token from the remaining set. Stops early, without consuming
/// more, when the cursor runs dry.
inline token_record encode_token(bit_cursor& bits, const token_distribution& dist, double min_split_entropy,
                                 rng& gen) {
  prob_subset current(dist);
  token_record rec;
  while (!bits.empty()) {
    auto split = partition(current, min_split_entropy);
    if (!split) break;
    current = bits.take() == 0 ? std::move(split->left) : std::move(split->right);
    ++rec.bits_embedded;
  }
  rec.token = sample_from(current, gen.uniform());
  return rec;
}

/// Same walk with bits drawn from `gen` on demand; used for simulating an
/// endless uniformly random (ciphertext) bitstream.
inline token_record encode_token_random_bits(const token_distribution& dist, double min_split_entropy, rng& gen) {
  prob_subset current(dist);
  token_record rec;
  for (;;) {
    auto split = partition(current, min_split_entropy);
    if (!split) break;
    current = gen.bit() ? std::move(split->right) : std::move(split->left);
    ++rec.bits_embedded;
  }
  rec.token = sample_from(current, gen.uniform());
  return rec;
}

/// Bits carried by `token` under `dist`. Throws desync_error when the token
/// is not in the distribution.
inline std::vector<std::uint8_t> decode_token(token_id token, const token_distribution& dist,
                                              double min_split_entropy) {
  if (!dist.contains(token))
    throw desync_error("token " + std::to_string(token) + " is not in the receiver's distribution");
  prob_subset current(dist);
  std::vector<std::uint8_t> out;
  for (;;) {
    auto split = partition(current, min_split_entropy);
    if (!split) break;
    if (split->left.contains(token)) {
      out.push_back(0);
      current = std::move(split->left);
    } else {
      out.push_back(1);
      current = std::move(split->right);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Message framing
// ---------------------------------------------------------------------------

inline constexpr std::size_t length_prefix_bits = 32;

struct message_frame {
  std::vector<std::uint8_t> payload;
  std::vector<std::uint8_t> framed_bits;  // whitened length prefix ++ payload bits

  static message_frame build(std::span<const std::uint8_t> payload, const channel_key& key) {
    if (payload.size() > 0xffffffffULL) throw invalid_input("payload too large for a 32-bit length prefix");
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::vector<std::uint8_t> plain{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                                    static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
    plain.insert(plain.end(), payload.begin(), payload.end());
    return {std::vector<std::uint8_t>(payload.begin(), payload.end()), whiten(bytes_to_bits(plain), key)};
  }
};

struct encode_options {
  double min_split_entropy = 0.9;
  std::uint64_t rng_seed = 0;
  std::size_t max_tokens = 4096;
};

/// Generates tokens from `source` until the frame is embedded, then keeps
/// sampling honestly until `max_tokens` or end of sequence. Throws
/// truncation_error if the frame does not fit.
inline std::vector<token_record> encode_message(std::span<const std::uint8_t> payload, const channel_key& key,
                                                distribution_source& source, const encode_options& opts) {
  const auto frame = message_frame::build(payload, key);
  bit_cursor cursor(frame.framed_bits);
  rng gen(opts.rng_seed);
  std::vector<token_id> history;
  std::vector<token_record> out;
  bit_cursor exhausted;

  while (history.size() < opts.max_tokens) {
    auto dist = source.next(history);
    if (!dist) break;
    token_record rec = cursor.empty() ? encode_token(exhausted, *dist, opts.min_split_entropy, gen)
                                      : encode_token(cursor, *dist, opts.min_split_entropy, gen);
    rec.position = history.size();
    history.push_back(rec.token);
    out.push_back(rec);
  }
  if (!cursor.empty()) throw truncation_error(cursor.position(), frame.framed_bits.size());
  return out;
}

/// Replays `source` over `tokens`, decodes and unwhitens the frame.
inline std::vector<std::uint8_t> decode_message(std::span<const token_id> tokens, const channel_key& key,
                                                distribution_source& source, double min_split_entropy) {
  std::vector<std::uint8_t> raw;
  std::optional<std::size_t> frame_bits;
  std::vector<std::uint8_t> plain;

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto dist = source.next(tokens.first(i));
    if (!dist) throw desync_error("distribution source ended at position " + std::to_string(i));
    const auto bits = decode_token(tokens[i], *dist, min_split_entropy);
    raw.insert(raw.end(), bits.begin(), bits.end());

    if (!frame_bits && raw.size() >= length_prefix_bits) {
      const auto head = bits_to_bytes(whiten(std::span(raw).first(length_prefix_bits), key));
      const std::uint64_t n = (std::uint64_t{head[0]} << 24) | (std::uint64_t{head[1]} << 16) |
                              (std::uint64_t{head[2]} << 8) | std::uint64_t{head[3]};
      frame_bits = length_prefix_bits + 8 * n;
    }
    if (frame_bits && raw.size() >= *frame_bits) {
      raw.resize(*frame_bits);
      plain = bits_to_bytes(whiten(raw, key));
      return {plain.begin() + 4, plain.end()};
    }
  }
  if (frame_bits)
    throw frame_error(frame_error::kind::length_exceeds_capacity,
                      "declared payload needs " + std::to_string(*frame_bits) + " bits but the stream carries " +
                          std::to_string(raw.size()));
  throw frame_error(frame_error::kind::incomplete, "token stream ended before the length prefix (" +
                                                       std::to_string(raw.size()) + " bits)");
}

}  // namespace llmstego
