#pragma once

/**
 * @file experiments.hpp
 * @brief Monte Carlo drivers for the capacity / detectability trade-off.
 *
 * Each sweep is split into independent cells (and runs within cells). Every
 * run gets its own generator seeded from (master seed, cell, run), results
 * are stored by index, and the CSV is written afterwards, so the output does
 * not depend on the number of worker threads.
 *
 * Runs draw distributions from the corpus with replacement, so the corpus
 * size never limits the token budget.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "llmstego/codec.hpp"
#include "llmstego/csv.hpp"
#include "llmstego/detector.hpp"
#include "llmstego/distribution.hpp"
#include "llmstego/partition.hpp"
#include "llmstego/random.hpp"

namespace llmstego {

// ---------------------------------------------------------------------------
// Plumbing
// ---------------------------------------------------------------------------

/// Calls fn(i) for i in [0, count) on `threads` workers (0 = hardware concurrency).
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Honest inverse-CDF draw over the whole distribution.
inline token_id sample_honest(const token_distribution& dist, rng& gen) {
  const auto entries = dist.entries();
  const double u = gen.uniform();
  double acc = 0.0;
  for (const auto& e : entries) {
    acc += e.prob;
    if (u < acc) return e.token;
  }
  return entries.back().token;
}

/// Kolmogorov-Smirnov distance between the sample and Uniform(0, 1).
inline double ks_uniform(std::vector<double> sample) {
  if (sample.empty()) return 0.0;
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double x = std::clamp(sample[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
  }
  return d;
}

/// P(X >= k) for X ~ Binomial(n, p), summed in log space.
inline double binomial_upper_tail(std::size_t n, std::size_t k, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  double total = 0.0;
  for (std::size_t i = k; i <= n; ++i) {
    const double log_term = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(i) + 1.0) -
                            std::lgamma(static_cast<double>(n - i) + 1.0) + static_cast<double>(i) * std::log(p) +
                            static_cast<double>(n - i) * std::log1p(-p);
    const double term = std::exp(log_term);
    total += term;
    if (term < total * 1e-17) break;
  }
  return std::min(total, 1.0);
}

enum class sampling_mode { stego, honest };

inline const char* to_string(sampling_mode m) { return m == sampling_mode::stego ? "stego" : "honest"; }

struct run_result {
  detection_report report;
  std::size_t bits = 0;
};

/// One run of `n_tokens` positions drawn with replacement from `corpus`.
/// In stego mode the tokens carry an endless uniformly random bitstream.
inline run_result simulate_run(std::span<const token_distribution> corpus, std::size_t n_tokens,
                               double min_split_entropy, sampling_mode mode, std::uint64_t seed) {
  if (corpus.empty()) throw invalid_input("corpus is empty");
  rng gen(seed);
  deviation_accumulator acc;
  run_result r;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    const auto& dist = corpus[gen.below(corpus.size())];
    token_id token;
    if (mode == sampling_mode::stego) {
      const auto rec = encode_token_random_bits(dist, min_split_entropy, gen);
      r.bits += rec.bits_embedded;
      token = rec.token;
    } else {
      token = sample_honest(dist, gen);
    }
    acc.add_token(dist, token);
  }
  r.report = acc.report();
  return r;
}

inline double mean_entropy(std::span<const token_distribution> corpus) {
  double s = 0.0;
  for (const auto& d : corpus) s += d.entropy();
  return corpus.empty() ? 0.0 : s / static_cast<double>(corpus.size());
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// 1 - H_s log-spaced from 1e-1 to 1e-4 (nine points).
inline std::vector<double> default_hs_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 8; ++i) g.push_back(1.0 - std::pow(10.0, -1.0 - 3.0 * i / 8.0));
  return g;
}

struct sweep_config {
  std::vector<double> hs_grid = default_hs_grid();
  std::vector<std::size_t> n_tokens_grid{1000, 10000, 100000};
  std::size_t runs_per_cell = 1000;
  std::vector<double> thresholds{1e-6, 1e-3, 0.05};
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  /// Token budget per H_s for the bit-rate curve.
  std::size_t bitrate_tokens = 100000;
  /// Multiplier c in epsilon = c / sqrt(N) (the constant hidden by O(.)).
  double epsilon_multiplier = 1.0;

  void validate() const {
    if (hs_grid.empty()) throw invalid_input("hs grid is empty");
    for (double h : hs_grid)
      if (!(h > 0.0 && h <= 1.0)) throw invalid_input("H_s values must lie in (0, 1]");
    if (n_tokens_grid.empty()) throw invalid_input("token grid is empty");
    for (auto n : n_tokens_grid)
      if (n == 0) throw invalid_input("token counts must be positive");
    if (runs_per_cell == 0) throw invalid_input("runs_per_cell must be positive");
    for (double t : thresholds)
      if (!(t > 0.0 && t < 1.0)) throw invalid_input("thresholds must lie in (0, 1)");
    if (!(epsilon_multiplier > 0.0)) throw invalid_input("epsilon multiplier must be positive");
  }
};

// ---------------------------------------------------------------------------
// Bit rate
// ---------------------------------------------------------------------------

struct bitrate_row {
  double hs;
  double bits_per_token;
  double mean_entropy;
};

inline double measure_bitrate(std::span<const token_distribution> corpus, double hs, std::size_t tokens,
                              std::uint64_t seed) {
  const auto r = simulate_run(corpus, tokens, hs, sampling_mode::stego, seed);
  return static_cast<double>(r.bits) / static_cast<double>(tokens);
}

/// Mean embedded bits per token for each H_s in the grid.
inline std::vector<bitrate_row> run_bitrate_sweep(std::span<const token_distribution> corpus,
                                                  const sweep_config& cfg) {
  cfg.validate();
  const double h = mean_entropy(corpus);
  std::vector<bitrate_row> rows(cfg.hs_grid.size());
  parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
    const double hs = cfg.hs_grid[i];
    rows[i] = {hs, measure_bitrate(corpus, hs, cfg.bitrate_tokens, derive_seed(cfg.seed, 1, i)), h};
  });
  return rows;
}

inline void write_bitrate_csv(std::ostream& out, std::span<const bitrate_row> rows) {
  csv::write_row(out, "hs", "bits_per_token", "mean_entropy");
  for (const auto& r : rows) csv::write_row(out, r.hs, r.bits_per_token, r.mean_entropy);
}

// ---------------------------------------------------------------------------
// Detection rate
// ---------------------------------------------------------------------------

struct detection_row {
  double hs;
  std::size_t n_tokens;
  double threshold;
  sampling_mode mode;
  std::size_t runs;
  double detection_fraction;
};

/// Per (H_s, N) cell: runs_per_cell encoding runs plus as many honest
/// control runs; reports the fraction of p-values below each threshold.
inline std::vector<detection_row> run_detection_sweep(std::span<const token_distribution> corpus,
                                                      const sweep_config& cfg) {
  cfg.validate();
  const std::size_t n_hs = cfg.hs_grid.size();
  const std::size_t n_n = cfg.n_tokens_grid.size();
  const std::size_t cells = n_hs * n_n * 2;
  const std::size_t runs = cfg.runs_per_cell;

  std::vector<double> pvalues(cells * runs);
  parallel_for(pvalues.size(), cfg.threads, [&](std::size_t job) {
    const std::size_t cell = job / runs;
    const std::size_t run = job % runs;
    const std::size_t hs_i = cell / (n_n * 2);
    const std::size_t n_i = (cell / 2) % n_n;
    const auto mode = cell % 2 == 0 ? sampling_mode::stego : sampling_mode::honest;
    pvalues[job] = simulate_run(corpus, cfg.n_tokens_grid[n_i], cfg.hs_grid[hs_i], mode,
                                derive_seed(cfg.seed, 2 + cell, run))
                       .report.p_value;
  });

  std::vector<detection_row> rows;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const std::size_t hs_i = cell / (n_n * 2);
    const std::size_t n_i = (cell / 2) % n_n;
    const auto mode = cell % 2 == 0 ? sampling_mode::stego : sampling_mode::honest;
    const auto first = pvalues.begin() + static_cast<std::ptrdiff_t>(cell * runs);
    for (double t : cfg.thresholds) {
      const auto hits = std::count_if(first, first + static_cast<std::ptrdiff_t>(runs), [t](double p) { return p < t; });
      rows.push_back({cfg.hs_grid[hs_i], cfg.n_tokens_grid[n_i], t, mode, runs,
                      static_cast<double>(hits) / static_cast<double>(runs)});
    }
  }
  return rows;
}

inline void write_detection_csv(std::ostream& out, std::span<const detection_row> rows) {
  csv::write_row(out, "hs", "n_tokens", "threshold", "mode", "runs", "detection_fraction");
  for (const auto& r : rows)
    csv::write_row(out, r.hs, r.n_tokens, r.threshold, to_string(r.mode), r.runs, r.detection_fraction);
}

// ---------------------------------------------------------------------------
// Theoretically safe rate
// ---------------------------------------------------------------------------

struct safe_rate_row {
  std::size_t n_tokens;
  double epsilon;
  double hs_min;
  double measured_bits_per_token;
  double safe_bits_per_token;
  double epsilon_multiplier;
};

/// Minimum split entropy that keeps the per-split statistical distance
/// below epsilon = c / sqrt(N).
inline double safe_min_split_entropy(std::size_t n_tokens, double multiplier = 1.0) {
  const double eps = std::min(1.0, multiplier / std::sqrt(static_cast<double>(n_tokens)));
  return split_entropy_at_imbalance(eps);
}

/// For each N the bit rate is measured at H_s_min(N) with common random
/// numbers (same draws for every N). The reported safe rate is the running
/// minimum over increasing N, which makes it a monotone lower envelope.
inline std::vector<safe_rate_row> run_safe_rate(std::span<const token_distribution> corpus,
                                                std::span<const std::size_t> n_grid, const sweep_config& cfg) {
  cfg.validate();
  std::vector<std::size_t> grid(n_grid.begin(), n_grid.end());
  std::sort(grid.begin(), grid.end());
  std::vector<safe_rate_row> rows(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
    const std::size_t n = grid[i];
    const double eps = std::min(1.0, cfg.epsilon_multiplier / std::sqrt(static_cast<double>(n)));
    const double hs_min = safe_min_split_entropy(n, cfg.epsilon_multiplier);
    const double rate = hs_min > 0.0 ? measure_bitrate(corpus, hs_min, cfg.bitrate_tokens, derive_seed(cfg.seed, 3))
                                     : 0.0;
    rows[i] = {n, eps, hs_min, rate, rate, cfg.epsilon_multiplier};
  });
  for (std::size_t i = 1; i < rows.size(); ++i)
    rows[i].safe_bits_per_token = std::min(rows[i].safe_bits_per_token, rows[i - 1].safe_bits_per_token);
  return rows;
}

inline void write_safe_rate_csv(std::ostream& out, std::span<const safe_rate_row> rows) {
  csv::write_row(out, "n_tokens", "epsilon", "hs_min", "measured_bits_per_token", "safe_bits_per_token",
                 "epsilon_multiplier", "note");
  for (const auto& r : rows)
    csv::write_row(out, r.n_tokens, r.epsilon, r.hs_min, r.measured_bits_per_token, r.safe_bits_per_token,
                   r.epsilon_multiplier, "lower bound; O() constant replaced by epsilon_multiplier");
}

// ---------------------------------------------------------------------------
// QQ
// ---------------------------------------------------------------------------

struct qq_series {
  double hs;
  std::size_t n_tokens;
  double bits_per_token;
  double ks_distance;
  std::vector<double> sorted_p;
};

/// `runs` encoding runs of `n_tokens` each per H_s; sorted p-values for a
/// QQ plot against Uniform(0, 1).
inline std::vector<qq_series> run_qq(std::span<const token_distribution> corpus, std::span<const double> hs_grid,
                                     std::size_t runs, std::size_t n_tokens, std::uint64_t seed,
                                     std::size_t threads = 0, sampling_mode mode = sampling_mode::stego) {
  if (runs == 0 || n_tokens == 0) throw invalid_input("runs and n_tokens must be positive");
  std::vector<run_result> results(hs_grid.size() * runs);
  parallel_for(results.size(), threads, [&](std::size_t job) {
    const std::size_t h = job / runs;
    results[job] = simulate_run(corpus, n_tokens, hs_grid[h], mode, derive_seed(seed, 4 + h, job % runs));
  });
  std::vector<qq_series> out;
  for (std::size_t h = 0; h < hs_grid.size(); ++h) {
    qq_series s{hs_grid[h], n_tokens, 0.0, 0.0, {}};
    std::size_t bits = 0;
    for (std::size_t r = 0; r < runs; ++r) {
      const auto& res = results[h * runs + r];
      s.sorted_p.push_back(res.report.p_value);
      bits += res.bits;
    }
    std::sort(s.sorted_p.begin(), s.sorted_p.end());
    s.bits_per_token = static_cast<double>(bits) / static_cast<double>(runs * n_tokens);
    s.ks_distance = ks_uniform(s.sorted_p);
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_qq_csv(std::ostream& out, std::span<const qq_series> series) {
  csv::write_row(out, "hs", "n_tokens", "bits_per_token", "rank", "p_value", "uniform_quantile");
  for (const auto& s : series) {
    const double n = static_cast<double>(s.sorted_p.size());
    for (std::size_t i = 0; i < s.sorted_p.size(); ++i)
      csv::write_row(out, s.hs, s.n_tokens, s.bits_per_token, i + 1, s.sorted_p[i],
                     (static_cast<double>(i) + 0.5) / n);
  }
}

}  // namespace llmstego
