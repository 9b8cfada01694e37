#pragma once

/**
 * @file detector.hpp
 * @brief The warden's information-deviation test.
 *
 * For each observed token the warden knows the distribution it should have
 * been drawn from, so it knows the expected information H_n (the entropy)
 * and its variance. The mean deviation between expected and realized
 * information is approximately normal under honest sampling; a large
 * |z| flags manipulated sampling.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>

#include "llmstego/distribution.hpp"
#include "llmstego/errors.hpp"

namespace llmstego {

struct detection_report {
  std::size_t n_tokens = 0;
  double d_hat = 0.0;
  double sigma = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

/// Below this many tokens the normal approximation is questionable.
inline constexpr std::size_t min_recommended_tokens = 100;

/// Phi(z) through erfc, which is accurate to a few ulp over the whole line.
inline double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Two-sided p-value 2(1 - Phi(|d|/sigma)), evaluated as erfc(z/sqrt 2) so
/// tiny p-values keep their precision. sigma == 0 is a degenerate stream of
/// forced tokens: p = 1 if d_hat == 0, else 0.
inline double p_value(double d_hat, double sigma) noexcept {
  if (sigma > 0.0) return std::erfc(std::abs(d_hat) / sigma / std::numbers::sqrt2);
  return d_hat == 0.0 ? 1.0 : 0.0;
}

/// Running sums for the deviation statistic; lets Monte Carlo drivers skip
/// materializing the distribution sequence.
class deviation_accumulator {
 public:
  /// `info` is the realized information -log2 p of the drawn token.
  void add(const token_distribution& dist, double info) noexcept {
    const double h = dist.entropy();
    deviation_sum_ += h - info;
    variance_sum_ += dist.information_second_moment() - h * h;
    ++n_;
  }

  void add_token(const token_distribution& dist, token_id token) { add(dist, information(dist, token)); }

  std::size_t count() const noexcept { return n_; }

  detection_report report() const {
    if (n_ == 0) throw invalid_input("no tokens to test");
    detection_report r;
    const double n = static_cast<double>(n_);
    r.n_tokens = n_;
    r.d_hat = deviation_sum_ / n;
    // Rounding can leave a tiny negative variance for near-deterministic positions.
    r.sigma = std::sqrt(std::max(variance_sum_, 0.0)) / n;
    r.z = r.sigma > 0.0 ? std::abs(r.d_hat) / r.sigma : (r.d_hat == 0.0 ? 0.0 : INFINITY);
    r.p_value = p_value(r.d_hat, r.sigma);
    return r;
  }

 private:
  double deviation_sum_ = 0.0;
  double variance_sum_ = 0.0;
  std::size_t n_ = 0;
};

inline detection_report detect(std::span<const token_distribution> dists, std::span<const token_id> tokens) {
  if (dists.size() != tokens.size())
    throw invalid_input("got " + std::to_string(dists.size()) + " distributions for " +
                        std::to_string(tokens.size()) + " tokens");
  deviation_accumulator acc;
  for (std::size_t i = 0; i < dists.size(); ++i) acc.add_token(dists[i], tokens[i]);
  return acc.report();
}

struct deviation {
  double d_hat;
  double sigma;
};

inline deviation deviation_statistic(std::span<const token_distribution> dists, std::span<const token_id> tokens) {
  const auto r = detect(dists, tokens);
  return {r.d_hat, r.sigma};
}

inline std::string detection_csv_header() { return "n_tokens,d_hat,sigma,z,p_value"; }

}  // namespace llmstego
