#pragma once

/**
 * @file partition.hpp
 * @brief Almost-greedy two-way balanced partitioning of a probability set.
 *
 * Given a set P sorted in the distribution order with sum 2d, take the
 * longest prefix that stays clear of d, then brute-force the next k items
 * (an "adjustment window") for the subset that brings the prefix sum
 * closest to d. The split is accepted only if its binary entropy reaches
 * the configured minimum split entropy.
 *
 * Everything here is deterministic: the decoder re-runs the exact same
 * floating-point operations in the same order as the encoder.
 */

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "llmstego/distribution.hpp"
#include "llmstego/errors.hpp"

namespace llmstego {

/// An ordered subset of a distribution's entries with its probability mass.
class prob_subset {
 public:
  explicit prob_subset(std::vector<token_prob> items) : items_(std::move(items)) {
    if (items_.empty()) throw invalid_input("probability subset is empty");
    for (const auto& e : items_) total_ += e.prob;
    if (!(total_ > 0.0)) throw invalid_input("probability subset has non-positive total");
  }

  explicit prob_subset(const token_distribution& dist)
      : prob_subset(std::vector<token_prob>(dist.entries().begin(), dist.entries().end())) {}

  std::span<const token_prob> items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  double total() const noexcept { return total_; }

  bool contains(token_id t) const noexcept {
    return std::any_of(items_.begin(), items_.end(), [t](const token_prob& e) { return e.token == t; });
  }

  friend bool operator==(const prob_subset& a, const prob_subset& b) {
    return a.items_ == b.items_ && a.total_ == b.total_;
  }

 private:
  std::vector<token_prob> items_;
  double total_ = 0.0;
};

/// Binary entropy in bits; 0 at the endpoints.
inline double split_entropy(double p) noexcept {
  if (!(p > 0.0 && p < 1.0)) return 0.0;
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

/// Split entropy of a partition with masses (1-delta)/2 and (1+delta)/2.
inline double split_entropy_at_imbalance(double delta) noexcept {
  return split_entropy(0.5 * (1.0 - delta));
}

/// Size of the brute-force window: floor(-log2(1 - H_s) - 0.5) clamped to [2, 16].
inline int adjustment_width(double min_split_entropy) {
  if (!(min_split_entropy > 0.0 && min_split_entropy <= 1.0))
    throw invalid_input("minimum split entropy must lie in (0, 1]");
  if (min_split_entropy >= 1.0) return 16;
  const double raw = std::floor(-std::log2(1.0 - min_split_entropy) - 0.5);
  return static_cast<int>(std::clamp(raw, 2.0, 16.0));
}

/// Approximate distinguishing advantage of a scheme with minimum split entropy H_s.
inline double security_level(double min_split_entropy) noexcept { return 2.0 * (1.0 - min_split_entropy); }

struct partition_result {
  prob_subset left;   // encodes a 0 bit
  prob_subset right;  // encodes a 1 bit
  double p_left;
  double split_entropy;

  friend bool operator==(const partition_result&, const partition_result&) = default;
};

namespace detail {

struct split_choice {
  std::size_t prefix;   // number of leading items always on the left
  std::size_t window;   // number of items after the prefix that are brute-forced
  std::uint32_t mask;   // window items on the left (bit i <-> item prefix + i)
};

inline split_choice choose_split(std::span<const token_prob> items, double total, int k) {
  const double half = 0.5 * total;
  const std::size_t m = items.size();

  // j = first prefix length whose sum reaches half.
  std::size_t j = m;
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    running += items[i].prob;
    if (running >= half) {
      j = i + 1;
      break;
    }
  }
  const std::size_t kw = static_cast<std::size_t>(k);
  const std::size_t n = j > kw ? j - kw : 0;
  const std::size_t window = std::min(kw, m - n);

  double prefix_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) prefix_sum += items[i].prob;

  // Subset sums of the window, built incrementally from the lowest set bit.
  thread_local std::vector<double> sums;
  const std::uint32_t count = std::uint32_t{1} << window;
  sums.assign(count, 0.0);
  std::uint32_t best = 0;
  double best_gap = std::abs(prefix_sum - half);
  for (std::uint32_t mask = 1; mask < count; ++mask) {
    const std::uint32_t low = mask & (~mask + 1);
    const int bit = std::countr_zero(low);
    sums[mask] = sums[mask ^ low] + items[n + static_cast<std::size_t>(bit)].prob;
    const double gap = std::abs(prefix_sum + sums[mask] - half);
    if (gap < best_gap) {
      best_gap = gap;
      best = mask;
    }
  }
  return {n, window, best};
}

}  // namespace detail

/// Splits `set` into two halves of nearly equal mass. Returns nullopt when
/// the set has a single item or the best split found has split entropy
/// below `min_split_entropy`.
inline std::optional<partition_result> partition(const prob_subset& set, double min_split_entropy) {
  const int k = adjustment_width(min_split_entropy);
  const auto items = set.items();
  if (items.size() < 2) return std::nullopt;

  const auto choice = detail::choose_split(items, set.total(), k);

  std::vector<token_prob> left;
  std::vector<token_prob> right;
  left.reserve(items.size());
  right.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    bool on_left = i < choice.prefix;
    if (!on_left && i < choice.prefix + choice.window)
      on_left = ((choice.mask >> (i - choice.prefix)) & 1U) != 0;
    (on_left ? left : right).push_back(items[i]);
  }
  if (left.empty() || right.empty()) return std::nullopt;

  prob_subset left_set(std::move(left));
  prob_subset right_set(std::move(right));
  const double p_left = left_set.total() / set.total();
  const double hs = split_entropy(p_left);
  if (!(hs >= min_split_entropy)) return std::nullopt;
  return partition_result{std::move(left_set), std::move(right_set), p_left, hs};
}

}  // namespace llmstego
