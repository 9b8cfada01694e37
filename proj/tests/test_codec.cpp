#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "llmstego/codec.hpp"
#include "llmstego/source.hpp"
#include "oracles.hpp"

using namespace llmstego;

namespace {

token_distribution uniform4() {
  return token_distribution({{10, 0.25}, {11, 0.25}, {12, 0.25}, {13, 0.25}});
}

channel_key random_key(rng& gen) {
  channel_key k;
  for (auto& b : k.key) b = static_cast<std::uint8_t>(gen.below(256));
  for (auto& b : k.nonce) b = static_cast<std::uint8_t>(gen.below(256));
  return k;
}

std::shared_ptr<const std::vector<token_distribution>> small_corpus(std::uint64_t seed, std::size_t n) {
  synth_config cfg;
  cfg.seed = seed;
  cfg.wide_prob = 0.0;
  return std::make_shared<const std::vector<token_distribution>>(generate_synthetic_corpus(cfg, n));
}

std::vector<token_id> tokens_of(const std::vector<token_record>& recs) {
  std::vector<token_id> t;
  for (const auto& r : recs) t.push_back(r.token);
  return t;
}

token_distribution random_distribution(rng& gen, std::size_t m) {
  std::vector<double> p(m);
  double s = 0.0;
  for (auto& v : p) {
    v = std::exp(2.0 * gen.normal());
    s += v;
  }
  for (auto& v : p) v /= s;
  return token_distribution::from_probabilities(p);
}

}  // namespace

TEST(EncodeToken, PointMassCarriesNothing) {
  const token_distribution d({{42, 1.0}});
  const std::vector<std::uint8_t> bits{1, 0, 1};
  bit_cursor cur(bits);
  rng gen(1);
  const auto rec = encode_token(cur, d, 0.9, gen);
  EXPECT_EQ(rec.bits_embedded, 0U);
  EXPECT_EQ(rec.token, 42U);
  EXPECT_EQ(cur.position(), 0U);
}

TEST(EncodeToken, UniformFourHandExecuted) {
  const std::vector<std::uint8_t> bits{1, 0};
  bit_cursor cur(bits);
  rng gen(2);
  const auto rec = encode_token(cur, uniform4(), 0.99, gen);
  EXPECT_EQ(rec.bits_embedded, 2U);
  EXPECT_EQ(rec.token, 12U);
}

TEST(EncodeToken, StopsWhenBitsRunOut) {
  const std::vector<std::uint8_t> bits{1};
  bit_cursor cur(bits);
  rng gen(3);
  const auto rec = encode_token(cur, uniform4(), 0.99, gen);
  EXPECT_EQ(rec.bits_embedded, 1U);
  EXPECT_TRUE(rec.token == 12U || rec.token == 13U);
  EXPECT_TRUE(cur.empty());
}

TEST(DecodeToken, PointMassAndUniformFour) {
  EXPECT_TRUE(decode_token(42, token_distribution({{42, 1.0}}), 0.9).empty());
  EXPECT_EQ(decode_token(12, uniform4(), 0.99), (std::vector<std::uint8_t>{1, 0}));
  EXPECT_THROW(decode_token(99, uniform4(), 0.99), desync_error);
}

TEST(DecodeToken, RecoversEmbeddedPrefix) {
  rng gen(4);
  const double grid[] = {0.9, 0.99, 0.999, 0.9999};
  for (int trial = 0; trial < 2000; ++trial) {
    const auto d = random_distribution(gen, 1 + gen.below(40));
    std::vector<std::uint8_t> bits(gen.below(12));
    for (auto& b : bits) b = gen.bit();
    const double hs = grid[gen.below(4)];
    bit_cursor cur(bits);
    const auto rec = encode_token(cur, d, hs, gen);
    const auto decoded = decode_token(rec.token, d, hs);
    ASSERT_GE(decoded.size(), rec.bits_embedded);
    for (std::size_t i = 0; i < rec.bits_embedded; ++i) EXPECT_EQ(decoded[i], bits[i]);
  }
}

TEST(EncodeToken, InducedMarginalWithinAccumulatedImbalance) {
  rng gen(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = random_distribution(gen, 2 + gen.below(12));
    const double hs = trial % 2 ? 0.9 : 0.99;
    std::map<token_id, double> induced;
    std::vector<double> imbalance;
    oracle::induced_marginals(prob_subset(d), hs, 1.0, induced, imbalance);
    double bound = 0.0;
    for (double x : imbalance) bound += x;
    double tv = 0.0;
    double mass = 0.0;
    for (const auto& e : d.entries()) {
      tv += std::abs(induced[e.token] - e.prob);
      mass += induced[e.token];
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_LE(0.5 * tv, bound + 1e-12);
    for (const auto& e : d.entries()) EXPECT_LE(std::abs(induced[e.token] - e.prob), bound + 1e-12);
  }
}

TEST(EncodeToken, ZeroCapacityPositionsSampleHonestly) {
  // (0.7, 0.2, 0.1) cannot be split at 0.99, so the encoder must reproduce it.
  const token_distribution d({{0, 0.7}, {1, 0.2}, {2, 0.1}});
  const std::vector<std::uint8_t> bits(1, 1);
  rng gen(6);
  std::map<token_id, int> counts;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    bit_cursor cur(bits);
    const auto rec = encode_token(cur, d, 0.99, gen);
    ASSERT_EQ(rec.bits_embedded, 0U);
    ++counts[rec.token];
  }
  double chi2 = 0.0;
  for (const auto& e : d.entries()) {
    const double expected = n * e.prob;
    chi2 += (counts[e.token] - expected) * (counts[e.token] - expected) / expected;
  }
  EXPECT_LT(chi2, 13.8);  // chi-square, 2 dof, alpha = 0.001
}

TEST(MessageFrame, LayoutAndWhitening) {
  rng gen(7);
  const auto key = random_key(gen);
  const std::vector<std::uint8_t> payload{0xde, 0xad};
  const auto f = message_frame::build(payload, key);
  ASSERT_EQ(f.framed_bits.size(), 32U + 16U);
  const auto plain = bits_to_bytes(whiten(f.framed_bits, key));
  EXPECT_EQ(plain, (std::vector<std::uint8_t>{0, 0, 0, 2, 0xde, 0xad}));
}

TEST(Message, EmptyPayloadRoundTrip) {
  rng gen(8);
  const auto key = random_key(gen);
  const auto corpus = small_corpus(8, 2000);
  replay_source enc(corpus, 99);
  const auto recs = encode_message({}, key, enc, {0.9, 1, 500});
  replay_source dec(corpus, 99);
  EXPECT_TRUE(decode_message(tokens_of(recs), key, dec, 0.9).empty());
}

TEST(Message, RandomPayloadsRoundTrip) {
  rng gen(9);
  const auto corpus = small_corpus(9, 5000);
  const double grid[] = {0.9, 0.99, 0.999};
  for (int trial = 0; trial < 200; ++trial) {
    const auto key = random_key(gen);
    std::vector<std::uint8_t> payload(gen.below(65));
    for (auto& b : payload) b = static_cast<std::uint8_t>(gen.below(256));
    const double hs = grid[trial % 3];
    const std::uint64_t seed = gen.next_u64();
    replay_source enc(corpus, seed);
    std::vector<token_record> recs;
    try {
      recs = encode_message(payload, key, enc, {hs, gen.next_u64(), 5000});
    } catch (const truncation_error&) {
      continue;
    }
    replay_source dec(corpus, seed);
    EXPECT_EQ(decode_message(tokens_of(recs), key, dec, hs), payload);
  }
}

TEST(Message, SixteenBytesFitsNearPredictedBudget) {
  rng gen(10);
  const auto key = random_key(gen);
  const auto corpus = small_corpus(10, 20000);
  std::vector<std::uint8_t> payload(16, 0x5a);
  replay_source enc(corpus, 3);
  const auto recs = encode_message(payload, key, enc, {0.9, 5, 2000});
  std::size_t used = 0;
  std::size_t bits = 0;
  std::size_t zero = 0;
  for (const auto& r : recs) {
    if (bits >= 160) break;
    bits += r.bits_embedded;
    ++used;
    if (r.bits_embedded == 0) ++zero;
  }
  // ~1 bit/token on this corpus; 160 frame bits need a few hundred tokens at most.
  EXPECT_GE(bits, 160U);
  EXPECT_LT(used, 400U);
  EXPECT_GT(static_cast<double>(zero) / used, 0.3);
}

TEST(Message, TruncationReported) {
  rng gen(11);
  const auto key = random_key(gen);
  const auto corpus = small_corpus(11, 100);
  replay_source enc(corpus, 1);
  const std::vector<std::uint8_t> payload(1024, 7);
  try {
    encode_message(payload, key, enc, {0.9, 0, 1});
    FAIL() << "expected truncation";
  } catch (const truncation_error& e) {
    EXPECT_EQ(e.frame_bits(), 32U + 8U * 1024U);
    EXPECT_LE(e.bits_embedded(), 16U);
  }
}

TEST(Message, ContinuesHonestlyAfterFrame) {
  rng gen(12);
  const auto key = random_key(gen);
  const auto corpus = small_corpus(12, 3000);
  replay_source enc(corpus, 4);
  const auto recs = encode_message(std::vector<std::uint8_t>{1, 2, 3}, key, enc, {0.9, 2, 1000});
  EXPECT_EQ(recs.size(), 1000U);
  std::size_t total = 0;
  for (const auto& r : recs) total += r.bits_embedded;
  EXPECT_EQ(total, 32U + 24U);
}

TEST(Message, EndsAtSourceEndOfSequence) {
  rng gen(13);
  const auto key = random_key(gen);
  const auto corpus = small_corpus(13, 300);
  replay_source enc(corpus, 4);
  const auto recs = encode_message({}, key, enc, {0.9, 2, 100000});
  EXPECT_EQ(recs.size(), 300U);
}

TEST(Message, WrongKeyFailsCleanly) {
  rng gen(14);
  const auto corpus = small_corpus(14, 3000);
  int errors = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto key = random_key(gen);
    const auto wrong = random_key(gen);
    replay_source enc(corpus, trial);
    const auto recs = encode_message(std::vector<std::uint8_t>(8, 1), key, enc, {0.9, 1, 400});
    replay_source dec(corpus, trial);
    try {
      const auto out = decode_message(tokens_of(recs), wrong, dec, 0.9);
      EXPECT_NE(out, std::vector<std::uint8_t>(8, 1));
    } catch (const frame_error& e) {
      EXPECT_EQ(e.reason(), frame_error::kind::length_exceeds_capacity);
      ++errors;
    }
  }
  // A random 32-bit length almost never fits into 400 tokens.
  EXPECT_GE(errors, 48);
}

TEST(Message, TamperedTokenNeverCrashes) {
  rng gen(15);
  const auto corpus = small_corpus(15, 3000);
  for (int trial = 0; trial < 100; ++trial) {
    const auto key = random_key(gen);
    replay_source enc(corpus, trial);
    const auto recs = encode_message(std::vector<std::uint8_t>(12, 0x42), key, enc, {0.9, 1, 600});
    auto toks = tokens_of(recs);
    toks[gen.below(200)] = static_cast<token_id>(gen.below(32000));
    replay_source dec(corpus, trial);
    try {
      (void)decode_message(toks, key, dec, 0.9);
    } catch (const desync_error&) {
    } catch (const frame_error&) {
    }
  }
}

TEST(Message, IncompleteStream) {
  rng gen(16);
  const auto key = random_key(gen);
  const auto corpus = small_corpus(16, 3000);
  replay_source enc(corpus, 5);
  const auto recs = encode_message(std::vector<std::uint8_t>(32, 9), key, enc, {0.9, 1, 2000});
  auto toks = tokens_of(recs);
  toks.resize(10);
  replay_source dec(corpus, 5);
  EXPECT_THROW(decode_message(toks, key, dec, 0.9), frame_error);
}

TEST(Message, SourceEndingEarlyIsDesync) {
  rng gen(17);
  const auto key = random_key(gen);
  const auto corpus = small_corpus(17, 50);
  replay_source order(corpus, 5);
  std::vector<token_id> toks;
  for (std::size_t i = 0; i < 50; ++i) toks.push_back((*corpus)[order.order()[i]].entries()[0].token);
  toks.push_back(0);
  replay_source dec(corpus, 5);
  EXPECT_THROW(decode_message(toks, key, dec, 0.9), desync_error);
}
