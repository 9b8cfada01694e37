#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include "llmstego/source.hpp"

using namespace llmstego;

namespace {

std::vector<std::uint8_t> from_hex(const char* hex) {
  std::vector<std::uint8_t> out;
  for (const char* p = hex; p[0] && p[1]; p += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(p, 2), nullptr, 16)));
  }
  return out;
}

}  // namespace

TEST(CorpusFile, GoldenLayout) {
  const std::vector<token_distribution> c{token_distribution({{7, 1.0}}),
                                          token_distribution({{2, 0.75}, {258, 0.25}})};
  const auto bytes = serialize_corpus(c);
  const auto expect = from_hex(
      "4c4d4431"           // "LMD1"
      "0100"               // version 1
      "0200000000000000"   // count 2
      "01000000"           // m = 1
      "07000000" "000000000000f03f"
      "02000000"           // m = 2
      "02000000" "000000000000e83f"
      "02010000" "000000000000d03f");
  EXPECT_EQ(bytes, expect);
  EXPECT_EQ(parse_corpus(bytes), c);
}

TEST(CorpusFile, RoundTripIsBitExact) {
  synth_config cfg;
  cfg.seed = 5;
  const auto c = generate_synthetic_corpus(cfg, 1000);
  const auto path = (std::filesystem::temp_directory_path() / "llmstego_roundtrip.lmd").string();
  write_corpus(c, path);
  const auto back = read_corpus(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) ASSERT_EQ(back[i], c[i]) << i;
}

TEST(CorpusFile, BadMagic) {
  auto bytes = serialize_corpus(std::vector<token_distribution>{token_distribution({{1, 1.0}})});
  bytes[0] = 'X';
  bytes[1] = 'X';
  bytes[2] = 'X';
  bytes[3] = 'X';
  try {
    parse_corpus(bytes);
    FAIL();
  } catch (const corpus_format_error& e) {
    EXPECT_EQ(e.offset(), 0U);
  }
}

TEST(CorpusFile, TruncatedRecord) {
  const std::vector<token_distribution> c{token_distribution({{1, 1.0}}), token_distribution({{1, 0.5}, {2, 0.5}})};
  auto bytes = serialize_corpus(c);
  bytes.resize(bytes.size() - 3);
  try {
    parse_corpus(bytes);
    FAIL();
  } catch (const corpus_format_error& e) {
    EXPECT_EQ(e.record(), 1);
  }
}

TEST(CorpusFile, NonNormalizedRecordNamed) {
  // Second record sums to 0.8.
  const auto bytes = from_hex(
      "4c4d4431" "0100" "0200000000000000"
      "01000000" "07000000" "000000000000f03f"
      "02000000" "02000000" "000000000000e03f" "03000000" "333333333333d33f");
  try {
    parse_corpus(bytes);
    FAIL();
  } catch (const corpus_format_error& e) {
    EXPECT_EQ(e.record(), 1);
    EXPECT_NE(std::string(e.what()).find("sum"), std::string::npos);
  }
}

TEST(CorpusFile, TrailingGarbageRejected) {
  auto bytes = serialize_corpus(std::vector<token_distribution>{token_distribution({{1, 1.0}})});
  bytes.push_back(0);
  EXPECT_THROW(parse_corpus(bytes), corpus_format_error);
}

TEST(Synthetic, DeterministicInSeed) {
  synth_config cfg;
  cfg.seed = 77;
  EXPECT_EQ(serialize_corpus(generate_synthetic_corpus(cfg, 3000)),
            serialize_corpus(generate_synthetic_corpus(cfg, 3000)));
  synth_config other = cfg;
  other.seed = 78;
  EXPECT_NE(serialize_corpus(generate_synthetic_corpus(cfg, 300)),
            serialize_corpus(generate_synthetic_corpus(other, 300)));
}

TEST(Synthetic, AllPointMasses) {
  synth_config cfg;
  cfg.zero_entropy_prob = 1.0;
  const auto c = generate_synthetic_corpus(cfg, 500);
  const auto s = compute_corpus_stats(c);
  EXPECT_EQ(s.zero_entropy_fraction, 1.0);
  EXPECT_EQ(s.mean_entropy, 0.0);
}

TEST(Synthetic, ProfileHitsTargetEntropy) {
  for (double target : {0.05, 0.7, 1.55, 3.0, 6.5}) {
    for (std::size_t m : {std::size_t{200}, std::size_t{1024}}) {
      const auto p = detail::geometric_profile(target, m);
      const auto d = token_distribution::from_probabilities(p);
      EXPECT_NEAR(d.entropy(), target, 1e-6) << target << " " << m;
    }
  }
}

TEST(Synthetic, DefaultConfigStatistics) {
  // Loose sanity bounds here; the calibrated tolerances are checked by the acceptance suite.
  const auto c = generate_synthetic_corpus(synth_config{}, 20000);
  const auto f = filter_corpus(c, 1024);
  EXPECT_NEAR(f.removed_fraction, 0.006, 0.003);
  const auto s = compute_corpus_stats(f.kept);
  EXPECT_NEAR(s.zero_entropy_fraction, 0.40, 0.03);
  EXPECT_NEAR(s.mean_entropy, 1.15, 0.1);
}

TEST(Synthetic, RejectsBadConfig) {
  EXPECT_THROW(generate_synthetic_corpus(synth_config{}, 0), invalid_input);
  synth_config cfg;
  cfg.max_support = 1;
  EXPECT_THROW(generate_synthetic_corpus(cfg, 10), invalid_input);
}

TEST(ReplaySource, DeterministicAndSeedDependent) {
  synth_config cfg;
  const auto corpus = std::make_shared<const std::vector<token_distribution>>(generate_synthetic_corpus(cfg, 200));
  replay_source a(corpus, 9);
  replay_source b(corpus, 9);
  replay_source c(corpus, 10);
  std::vector<token_id> history;
  bool differs = false;
  for (std::size_t i = 0; i < corpus->size(); ++i) {
    const auto da = a.next(history);
    const auto db = b.next(history);
    const auto dc = c.next(history);
    ASSERT_TRUE(da && db && dc);
    EXPECT_EQ(*da, *db);
    differs = differs || !(*da == *dc);
    history.push_back(da->entries()[0].token);
  }
  EXPECT_TRUE(differs);
  EXPECT_FALSE(a.next(history).has_value());
  // a permutation of the corpus
  std::vector<std::size_t> order(a.order().begin(), a.order().end());
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(order[i], i);
}

TEST(ReplaySource, HistoryOnlyMattersThroughLength) {
  const auto corpus = std::make_shared<const std::vector<token_distribution>>(
      generate_synthetic_corpus(synth_config{}, 50));
  replay_source a(corpus, 1);
  const std::vector<token_id> h1{1, 2, 3};
  const std::vector<token_id> h2{9, 9, 9};
  EXPECT_EQ(*a.next(h1), *a.next(h2));
  EXPECT_THROW(replay_source(std::make_shared<const std::vector<token_distribution>>(), 1), invalid_input);
}
