#pragma once

/**
 * @file distribution.hpp
 * @brief Next-token probability distributions.
 *
 * Raw logits are turned into sampling distributions with temperature
 * scaling, a top-p cutoff and renormalization. The resulting
 * TokenDistribution is sorted by (probability descending, token id
 * ascending); encoder and decoder both rely on that order being total.
 *
 * All information quantities are in bits.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "llmstego/errors.hpp"

namespace llmstego {

using token_id = std::uint32_t;

struct token_prob {
  token_id token;
  double prob;

  friend bool operator==(const token_prob&, const token_prob&) = default;
};

/// Deterministic total order used everywhere a distribution is sorted.
constexpr bool descending_order(const token_prob& a, const token_prob& b) noexcept {
  if (a.prob != b.prob) return a.prob > b.prob;
  return a.token < b.token;
}

/// K raw model outputs, one per vocabulary entry.
class logit_vector {
 public:
  explicit logit_vector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw invalid_input("logit vector is empty");
    for (double v : values_) {
      if (!std::isfinite(v)) throw invalid_input("logit vector contains a non-finite value");
    }
  }

  std::span<const double> values() const noexcept { return values_; }
  std::size_t vocab_size() const noexcept { return values_.size(); }

 private:
  std::vector<double> values_;
};

struct sampler_config {
  double temperature = 1.1;
  double top_p = 0.95;
  double min_split_entropy = 0.9;
  std::size_t max_nonzero = 1024;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw invalid_input("temperature must be positive");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw invalid_input("top_p must lie in (0, 1]");
    if (!(min_split_entropy > 0.0 && min_split_entropy <= 1.0))
      throw invalid_input("min_split_entropy must lie in (0, 1]");
    if (max_nonzero == 0) throw invalid_input("max_nonzero must be positive");
  }
};

namespace detail {

inline double plog2p(double p) noexcept { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace detail

/// A sorted, strictly positive distribution that sums to one.
///
/// Entropy and the second moment of the information are computed once on
/// construction; the detector needs both for every position.
class token_distribution {
 public:
  static constexpr double sum_tolerance = 1e-9;

  explicit token_distribution(std::vector<token_prob> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw invalid_input("distribution has no entries");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const double p = entries_[i].prob;
      if (!(p > 0.0 && p <= 1.0)) throw invalid_input("probability outside (0, 1]");
      if (i > 0 && !descending_order(entries_[i - 1], entries_[i]))
        throw invalid_input("distribution is not in descending (prob, token id) order");
    }
    const double total = sum();
    if (std::abs(total - 1.0) > sum_tolerance)
      throw invalid_input("probabilities sum to " + std::to_string(total) + ", not 1");
    compute_moments();
  }

  /// Convenience: assigns token ids 0..n-1 and sorts.
  static token_distribution from_probabilities(std::span<const double> probs) {
    std::vector<token_prob> e;
    e.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) e.push_back({static_cast<token_id>(i), probs[i]});
    std::sort(e.begin(), e.end(), descending_order);
    return token_distribution(std::move(e));
  }

  std::span<const token_prob> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  double entropy() const noexcept { return entropy_; }
  /// E[h^2] with h = -log2 p of the drawn token.
  double information_second_moment() const noexcept { return second_moment_; }

  /// Linear scan; returns nullptr when absent.
  const token_prob* find(token_id t) const noexcept {
    for (const auto& e : entries_)
      if (e.token == t) return &e;
    return nullptr;
  }

  bool contains(token_id t) const noexcept { return find(t) != nullptr; }

  friend bool operator==(const token_distribution& a, const token_distribution& b) {
    return a.entries_ == b.entries_;
  }

 private:
  double sum() const noexcept {
    double s = 0.0;
    for (const auto& e : entries_) s += e.prob;
    return s;
  }

  void compute_moments() noexcept {
    if (entries_.size() == 1) {
      entropy_ = 0.0;
      second_moment_ = 0.0;
      return;
    }
    double h = 0.0;
    double h2 = 0.0;
    for (const auto& e : entries_) {
      const double info = -std::log2(e.prob);
      h += e.prob * info;
      h2 += e.prob * info * info;
    }
    entropy_ = h;
    second_moment_ = h2;
  }

  std::vector<token_prob> entries_;
  double entropy_ = 0.0;
  double second_moment_ = 0.0;
};

/// Temperature softmax, descending sort, top-p cutoff, renormalization.
///
/// The cutoff keeps c = 1 + max{n : q_1 + ... + q_n < C} entries, clamped
/// to the number of entries with nonzero probability.
inline token_distribution preprocess_logits(const logit_vector& logits, const sampler_config& config) {
  config.validate();
  const auto values = logits.values();
  const double max_logit = *std::max_element(values.begin(), values.end());

  std::vector<token_prob> q;
  q.reserve(values.size());
  double norm = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = std::exp((values[i] - max_logit) / config.temperature);
    q.push_back({static_cast<token_id>(i), w});
    norm += w;
  }
  for (auto& e : q) e.prob /= norm;
  std::sort(q.begin(), q.end(), descending_order);

  std::size_t below = 0;  // max n with prefix sum < C
  double prefix = 0.0;
  for (std::size_t n = 1; n <= q.size(); ++n) {
    prefix += q[n - 1].prob;
    if (prefix < config.top_p)
      below = n;
    else
      break;
  }
  std::size_t keep = std::min(below + 1, q.size());
  while (keep > 0 && q[keep - 1].prob <= 0.0) --keep;  // underflowed tails
  if (keep == 0) throw invalid_input("logits cannot be normalized");
  q.resize(keep);

  double kept = 0.0;
  for (const auto& e : q) kept += e.prob;
  for (auto& e : q) e.prob /= kept;
  // Division can break exact ties differently than before; re-establish the order.
  std::sort(q.begin(), q.end(), descending_order);
  return token_distribution(std::move(q));
}

inline double entropy(const token_distribution& dist) noexcept { return dist.entropy(); }

/// -log2 p of `token`; throws desync_error if the token is absent.
inline double information(const token_distribution& dist, token_id token) {
  const token_prob* e = dist.find(token);
  if (e == nullptr)
    throw desync_error("token " + std::to_string(token) + " is not in the distribution");
  if (dist.size() == 1) return 0.0;
  return -std::log2(e->prob);
}

struct filter_result {
  std::vector<token_distribution> kept;
  double removed_fraction = 0.0;
};

/// Drops distributions with more than `max_nonzero` entries.
inline filter_result filter_corpus(std::span<const token_distribution> corpus, std::size_t max_nonzero) {
  filter_result r;
  if (corpus.empty()) return r;
  std::size_t removed = 0;
  for (const auto& d : corpus) {
    if (d.size() > max_nonzero)
      ++removed;
    else
      r.kept.push_back(d);
  }
  r.removed_fraction = static_cast<double>(removed) / static_cast<double>(corpus.size());
  return r;
}

struct corpus_stats {
  std::size_t count = 0;
  double zero_entropy_fraction = 0.0;
  double mean_entropy = 0.0;
  double mean_nonzero_entropy = 0.0;
  double median_nonzero_entropy = 0.0;
  /// Filled in by callers that filtered the corpus first.
  double removed_wide_fraction = 0.0;
};

inline corpus_stats compute_corpus_stats(std::span<const token_distribution> corpus) {
  if (corpus.empty()) throw invalid_input("corpus is empty");
  corpus_stats s;
  s.count = corpus.size();
  std::vector<double> nonzero;
  double total = 0.0;
  for (const auto& d : corpus) {
    total += d.entropy();
    if (d.size() > 1) nonzero.push_back(d.entropy());
  }
  s.mean_entropy = total / static_cast<double>(s.count);
  s.zero_entropy_fraction =
      static_cast<double>(s.count - nonzero.size()) / static_cast<double>(s.count);
  if (!nonzero.empty()) {
    s.mean_nonzero_entropy = std::accumulate(nonzero.begin(), nonzero.end(), 0.0) /
                             static_cast<double>(nonzero.size());
    std::sort(nonzero.begin(), nonzero.end());
    const std::size_t m = nonzero.size();
    s.median_nonzero_entropy = m % 2 == 1 ? nonzero[m / 2] : 0.5 * (nonzero[m / 2 - 1] + nonzero[m / 2]);
  }
  return s;
}

}  // namespace llmstego
