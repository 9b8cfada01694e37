#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "llmstego/keystream.hpp"
#include "llmstego/random.hpp"

using namespace llmstego;

namespace {

std::string hex(const std::vector<std::uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (auto b : bytes) {
    s += digits[b >> 4];
    s += digits[b & 15];
  }
  return s;
}

}  // namespace

TEST(Keystream, Sp800_38aCounterModeVector) {
  // F.5.1 CTR-AES128: initial counter block f0f1...feff.
  const auto key = parse_channel_key("2b7e151628aed2a6abf7158809cf4f3c", "f0f1f2f3f4f5f6f7f8f9fafb");
  const auto ks = keystream_bytes(key, 64, 0xfcfdfeffU);
  EXPECT_EQ(hex(ks),
            "ec8cdf7398607cb0f2d21675ea9ea1e4"
            "362b7c3c6773516318a077d7fc5073ae"
            "6a2cc3787889374fbeb4c81b17ba6c44"
            "e89c399ff0f198c6d40a31db156cabfe");
}

TEST(Keystream, CounterStartsAtZero) {
  // Cross-checked against an independent AES-CTR implementation.
  const auto key = parse_channel_key("000102030405060708090a0b0c0d0e0f", "000102030405060708090a0b");
  EXPECT_EQ(hex(keystream_bytes(key, 32)), "f6677c97f280c501bf7f3bd0eba0afa9435b9ba12d75a4be8a977ea3cd011890");
}

TEST(Whiten, ZeroBitsYieldKeystreamPrefix) {
  const auto key = parse_channel_key("000102030405060708090a0b0c0d0e0f", "000102030405060708090a0b");
  const std::vector<std::uint8_t> zeros(20, 0);
  const auto w = whiten(zeros, key);
  // f6 67 7c -> 11110110 01100111 0111...
  const std::vector<std::uint8_t> expect{1, 1, 1, 1, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1, 1};
  EXPECT_EQ(w, expect);
}

TEST(Whiten, Involution) {
  rng gen(31);
  channel_key key;
  for (auto& b : key.key) b = static_cast<std::uint8_t>(gen.below(256));
  for (auto& b : key.nonce) b = static_cast<std::uint8_t>(gen.below(256));
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::uint8_t> bits(gen.below(600));
    for (auto& b : bits) b = gen.bit() ? 1 : 0;
    EXPECT_EQ(whiten(whiten(bits, key), key), bits);
  }
}

TEST(Whiten, EmptyInput) {
  const channel_key key{};
  EXPECT_TRUE(whiten({}, key).empty());
}

TEST(ChannelKey, HexParsing) {
  EXPECT_THROW(parse_channel_key("00", "000102030405060708090a0b"), invalid_input);
  EXPECT_THROW(parse_channel_key("zz0102030405060708090a0b0c0d0e0f", "000102030405060708090a0b"), invalid_input);
  EXPECT_THROW(parse_channel_key("000102030405060708090a0b0c0d0e0f", "0001"), invalid_input);
  const auto k = parse_channel_key("000102030405060708090A0B0C0D0E0F", "000102030405060708090a0b");
  EXPECT_EQ(k.key[10], 0x0a);
}

TEST(BitPacking, BytesBitsRoundTrip) {
  const std::vector<std::uint8_t> bytes{0x00, 0xff, 0x5a, 0x81};
  const auto bits = bytes_to_bits(bytes);
  ASSERT_EQ(bits.size(), 32U);
  EXPECT_EQ(bits[8], 1);
  EXPECT_EQ(bits[16], 0);
  EXPECT_EQ(bits[17], 1);
  EXPECT_EQ(bits_to_bytes(bits), bytes);
}
