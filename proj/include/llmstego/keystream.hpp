#pragma once

// AES-128 counter-mode keystream used to whiten message bits.
// Counter block layout: 96-bit nonce || 32-bit big-endian block counter.

#include <openssl/evp.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "llmstego/errors.hpp"

namespace llmstego {

struct channel_key {
  std::array<std::uint8_t, 16> key{};
  std::array<std::uint8_t, 12> nonce{};

  friend bool operator==(const channel_key&, const channel_key&) = default;
};

namespace detail {

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

template <std::size_t N>
std::array<std::uint8_t, N> parse_hex_fixed(std::string_view hex, const char* what) {
  if (hex.size() != 2 * N)
    throw invalid_input(std::string(what) + " must be " + std::to_string(2 * N) + " hex digits");
  std::array<std::uint8_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw invalid_input(std::string(what) + " is not valid hex");
    out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return out;
}

struct cipher_ctx_deleter {
  void operator()(EVP_CIPHER_CTX* ctx) const noexcept { EVP_CIPHER_CTX_free(ctx); }
};

}  // namespace detail

inline channel_key parse_channel_key(std::string_view key_hex, std::string_view nonce_hex) {
  return {detail::parse_hex_fixed<16>(key_hex, "key"), detail::parse_hex_fixed<12>(nonce_hex, "nonce")};
}

/// Produces `length` keystream bytes starting at block `initial_counter`.
inline std::vector<std::uint8_t> keystream_bytes(const channel_key& key, std::size_t length,
                                                 std::uint32_t initial_counter = 0) {
  std::vector<std::uint8_t> out(length);
  if (length == 0) return out;

  std::unique_ptr<EVP_CIPHER_CTX, detail::cipher_ctx_deleter> ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr, key.key.data(), nullptr) != 1)
    throw error("AES initialisation failed");
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);

  const std::size_t blocks = (length + 15) / 16;
  std::vector<std::uint8_t> counters(blocks * 16);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::uint8_t* block = counters.data() + 16 * b;
    std::copy(key.nonce.begin(), key.nonce.end(), block);
    const auto ctr = static_cast<std::uint32_t>(initial_counter + b);  // wraps mod 2^32
    block[12] = static_cast<std::uint8_t>(ctr >> 24);
    block[13] = static_cast<std::uint8_t>(ctr >> 16);
    block[14] = static_cast<std::uint8_t>(ctr >> 8);
    block[15] = static_cast<std::uint8_t>(ctr);
  }
  std::vector<std::uint8_t> stream(counters.size());
  int written = 0;
  if (EVP_EncryptUpdate(ctx.get(), stream.data(), &written, counters.data(),
                        static_cast<int>(counters.size())) != 1 ||
      static_cast<std::size_t>(written) != counters.size())
    throw error("AES encryption failed");
  std::copy(stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(length), out.begin());
  return out;
}

/// Bits are 0/1 bytes; bit i is XORed with keystream bit i (MSB first within
/// each keystream byte). Applying it twice restores the input.
inline std::vector<std::uint8_t> whiten(std::span<const std::uint8_t> bits, const channel_key& key) {
  const auto ks = keystream_bytes(key, (bits.size() + 7) / 8);
  std::vector<std::uint8_t> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const std::uint8_t k = (ks[i / 8] >> (7 - i % 8)) & 1U;
    out[i] = static_cast<std::uint8_t>((bits[i] & 1U) ^ k);
  }
  return out;
}

inline std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> bits;
  bits.reserve(bytes.size() * 8);
  for (std::uint8_t b : bytes)
    for (int i = 7; i >= 0; --i) bits.push_back(static_cast<std::uint8_t>((b >> i) & 1U));
  return bits;
}

/// Packs MSB-first; a trailing partial byte is dropped.
inline std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> bytes(bits.size() / 8);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    std::uint8_t v = 0;
    for (std::size_t j = 0; j < 8; ++j) v = static_cast<std::uint8_t>((v << 1) | (bits[8 * i + j] & 1U));
    bytes[i] = v;
  }
  return bytes;
}

}  // namespace llmstego
