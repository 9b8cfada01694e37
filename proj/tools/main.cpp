// Command-line driver: corpus tooling, encode/decode/detect, and the
// experiment sweeps that emit CSV.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "llmstego/http_source.hpp"
#include "llmstego/llmstego.hpp"

using namespace llmstego;

namespace {

struct key_options {
  std::string key;
  std::string nonce;
};

struct source_options {
  std::string corpus;
  std::uint64_t seed = 1;
  std::string endpoint;
  std::string prompt;
  std::size_t vocab = 32000;
  double temperature = 1.1;
  double top_p = 0.95;
};

struct output_target {
  std::string path;
  std::ofstream file;

  std::ostream& stream() {
    if (path.empty() || path == "-") return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw invalid_input("cannot open output file: " + path);
    return file;
  }
};

void add_source_flags(CLI::App* cmd, source_options& o) {
  cmd->add_option("--corpus", o.corpus, "Corpus file replayed as the distribution source");
  cmd->add_option("--seed", o.seed, "Seed for the corpus replay order");
  cmd->add_option("--endpoint", o.endpoint, "Logits server as host:port (instead of --corpus)");
  cmd->add_option("--prompt", o.prompt, "Prompt sent to the logits server");
  cmd->add_option("--vocab", o.vocab, "Vocabulary size expected from the logits server");
  cmd->add_option("--temperature", o.temperature, "Sampling temperature for server logits");
  cmd->add_option("--top-p", o.top_p, "Top-p cutoff for server logits");
}

void add_key_flags(CLI::App* cmd, key_options& k) {
  cmd->add_option("--key", k.key, "AES-128 key, 32 hex digits")->required();
  cmd->add_option("--nonce", k.nonce, "96-bit nonce, 24 hex digits")->required();
}

std::unique_ptr<distribution_source> make_source(const source_options& o) {
  if (!o.endpoint.empty()) {
    if (!o.corpus.empty()) throw invalid_input("use either --corpus or --endpoint, not both");
    http_source_config cfg;
    const auto colon = o.endpoint.rfind(':');
    if (colon == std::string::npos) throw invalid_input("--endpoint must be host:port");
    cfg.host = o.endpoint.substr(0, colon);
    cfg.port = std::stoi(o.endpoint.substr(colon + 1));
    cfg.prompt = o.prompt;
    cfg.vocab_size = o.vocab;
    cfg.sampler.temperature = o.temperature;
    cfg.sampler.top_p = o.top_p;
    return std::make_unique<http_logits_source>(cfg);
  }
  if (o.corpus.empty()) throw invalid_input("a distribution source is required (--corpus or --endpoint)");
  auto corpus = std::make_shared<const std::vector<token_distribution>>(read_corpus(o.corpus));
  return std::make_unique<replay_source>(corpus, o.seed);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open input file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<token_id> read_tokens(const std::string& path) {
  std::ifstream file;
  std::istream* in = &std::cin;
  if (!path.empty() && path != "-") {
    file.open(path);
    if (!file) throw invalid_input("cannot open token file: " + path);
    in = &file;
  }
  std::vector<token_id> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(*in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    unsigned long long v = 0;
    if (!(ls >> v) || v > UINT32_MAX || !(ls >> std::ws).eof())
      throw invalid_input("bad token id on line " + std::to_string(line_no));
    tokens.push_back(static_cast<token_id>(v));
  }
  return tokens;
}

std::vector<token_distribution> load_filtered(const std::string& path) {
  if (path.empty()) throw invalid_input("--corpus is required");
  auto f = filter_corpus(read_corpus(path), 1024);
  if (f.kept.empty()) throw invalid_input("corpus is empty after filtering");
  return std::move(f.kept);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hide encrypted bitstreams in token sampling decisions"};
  app.require_subcommand(1);

  // corpus ------------------------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "Create and inspect distribution corpora");
  corpus_cmd->require_subcommand(1);

  synth_config synth;
  std::size_t gen_count = 100000;
  std::string gen_out;
  auto* gen = corpus_cmd->add_subcommand("gen", "Generate a synthetic corpus");
  gen->add_option("--count", gen_count, "Number of distributions")->check(CLI::PositiveNumber);
  gen->add_option("--seed", synth.seed, "Generator seed");
  gen->add_option("--zero-prob", synth.zero_entropy_prob, "Probability of a point mass");
  gen->add_option("--entropy-median", synth.entropy_median, "Median entropy of nonzero positions (bits)");
  gen->add_option("--wide-prob", synth.wide_prob, "Probability of a very wide distribution");
  gen->add_option("--out", gen_out, "Output corpus file")->required();

  std::string stats_in;
  std::string stats_out;
  auto* stats = corpus_cmd->add_subcommand("stats", "Summary statistics after the 1024-entry filter");
  stats->add_option("--corpus", stats_in, "Corpus file")->required();
  stats->add_option("--out", stats_out, "CSV output (default stdout)");

  std::string filter_in;
  std::string filter_out;
  std::size_t filter_max = 1024;
  auto* filter = corpus_cmd->add_subcommand("filter", "Drop distributions with too many nonzero entries");
  filter->add_option("--corpus", filter_in, "Input corpus file")->required();
  filter->add_option("--out", filter_out, "Output corpus file")->required();
  filter->add_option("--max-nonzero", filter_max, "Largest support kept");

  // encode / decode / detect ------------------------------------------------
  source_options enc_src;
  key_options enc_key;
  double enc_hs = 0.9;
  std::string enc_message;
  std::string enc_in;
  std::string enc_out;
  std::size_t enc_tokens = 4096;
  std::uint64_t enc_rng_seed = 0;
  auto* encode = app.add_subcommand("encode", "Embed a payload; writes one token id per line");
  add_source_flags(encode, enc_src);
  add_key_flags(encode, enc_key);
  encode->add_option("--hs", enc_hs, "Minimum split entropy");
  auto* msg_opt = encode->add_option("--message", enc_message, "Payload given as text");
  encode->add_option("--in", enc_in, "Payload file")->excludes(msg_opt);
  encode->add_option("--tokens", enc_tokens, "Maximum number of tokens to generate");
  encode->add_option("--rng-seed", enc_rng_seed, "Seed for residual sampling");
  encode->add_option("--out", enc_out, "Token file (default stdout)");

  source_options dec_src;
  key_options dec_key;
  double dec_hs = 0.9;
  std::string dec_in;
  std::string dec_out;
  auto* decode = app.add_subcommand("decode", "Recover a payload from a token file");
  add_source_flags(decode, dec_src);
  add_key_flags(decode, dec_key);
  decode->add_option("--hs", dec_hs, "Minimum split entropy");
  decode->add_option("--in", dec_in, "Token file (default stdin)");
  decode->add_option("--out", dec_out, "Payload output (default stdout)");

  source_options det_src;
  std::string det_in;
  std::string det_out;
  auto* detect_cmd = app.add_subcommand("detect", "Test a token file against honest sampling");
  add_source_flags(detect_cmd, det_src);
  detect_cmd->add_option("--in", det_in, "Token file (default stdin)");
  detect_cmd->add_option("--out", det_out, "CSV output (default stdout)");

  // sweep -------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Run an experiment and write CSV");
  sweep->require_subcommand(1);
  std::string sw_corpus;
  std::string sw_out;
  std::vector<double> sw_hs;
  std::vector<std::size_t> sw_tokens;
  std::size_t sw_runs = 0;
  std::uint64_t sw_seed = 1;
  std::size_t sw_threads = 0;
  bool sw_large = false;
  double sw_multiplier = 1.0;
  auto* sw_bitrate = sweep->add_subcommand("bitrate", "Bits per token against H_s");
  auto* sw_detection = sweep->add_subcommand("detection", "Detection fraction per (H_s, N, threshold)");
  auto* sw_saferate = sweep->add_subcommand("saferate", "Theoretically safe bit rate against N");
  auto* sw_qq = sweep->add_subcommand("qq", "Sorted p-values for QQ plots");
  for (auto* s : {sw_bitrate, sw_detection, sw_saferate, sw_qq}) {
    s->add_option("--corpus", sw_corpus, "Corpus file (filtered to 1024 entries before use)")->required();
    s->add_option("--out", sw_out, "CSV output (default stdout)");
    s->add_option("--hs", sw_hs, "Minimum split entropy grid (repeatable)");
    s->add_option("--tokens", sw_tokens, "Token counts (repeatable)");
    s->add_option("--runs", sw_runs, "Runs per cell");
    s->add_option("--seed", sw_seed, "Master seed");
    s->add_option("--threads", sw_threads, "Worker threads (0 = all cores)");
    s->add_flag("--large", sw_large, "Add N = 1e6 to the token grid");
    s->add_option("--epsilon-multiplier", sw_multiplier, "Constant c in epsilon = c / sqrt(N)");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      write_corpus(generate_synthetic_corpus(synth, gen_count), gen_out);
    } else if (stats->parsed()) {
      const auto f = filter_corpus(read_corpus(stats_in), 1024);
      auto s = compute_corpus_stats(f.kept);
      s.removed_wide_fraction = f.removed_fraction;
      output_target out{stats_out, {}};
      auto& os = out.stream();
      csv::write_row(os, "count", "removed_wide_fraction", "zero_entropy_fraction", "mean_entropy",
                     "mean_nonzero_entropy", "median_nonzero_entropy");
      csv::write_row(os, s.count, s.removed_wide_fraction, s.zero_entropy_fraction, s.mean_entropy,
                     s.mean_nonzero_entropy, s.median_nonzero_entropy);
    } else if (filter->parsed()) {
      const auto f = filter_corpus(read_corpus(filter_in), filter_max);
      write_corpus(f.kept, filter_out);
      std::cerr << "kept " << f.kept.size() << ", removed fraction " << csv::format(f.removed_fraction) << "\n";
    } else if (encode->parsed()) {
      const auto key = parse_channel_key(enc_key.key, enc_key.nonce);
      const std::vector<std::uint8_t> payload =
          enc_in.empty() ? std::vector<std::uint8_t>(enc_message.begin(), enc_message.end()) : read_file(enc_in);
      auto src = make_source(enc_src);
      const auto recs = encode_message(payload, key, *src, {enc_hs, enc_rng_seed, enc_tokens});
      output_target out{enc_out, {}};
      auto& os = out.stream();
      std::size_t bits = 0;
      for (const auto& r : recs) {
        os << r.token << "\n";
        bits += r.bits_embedded;
      }
      std::cerr << recs.size() << " tokens, " << bits << " bits embedded\n";
    } else if (decode->parsed()) {
      const auto key = parse_channel_key(dec_key.key, dec_key.nonce);
      auto src = make_source(dec_src);
      const auto payload = decode_message(read_tokens(dec_in), key, *src, dec_hs);
      output_target out{dec_out, {}};
      out.stream().write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    } else if (detect_cmd->parsed()) {
      auto src = make_source(det_src);
      const auto tokens = read_tokens(det_in);
      deviation_accumulator acc;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto d = src->next(std::span<const token_id>(tokens.data(), i));
        if (!d) throw desync_error("source ended after " + std::to_string(i) + " tokens");
        acc.add_token(*d, tokens[i]);
      }
      const auto r = acc.report();
      if (r.n_tokens < min_recommended_tokens)
        std::cerr << "warning: fewer than " << min_recommended_tokens
                  << " tokens; the normal approximation is unreliable\n";
      output_target out{det_out, {}};
      auto& os = out.stream();
      os << detection_csv_header() << "\n";
      csv::write_row(os, r.n_tokens, r.d_hat, r.sigma, r.z, r.p_value);
    } else if (sweep->parsed()) {
      const auto corpus = load_filtered(sw_corpus);
      sweep_config cfg;
      cfg.seed = sw_seed;
      cfg.threads = sw_threads;
      cfg.epsilon_multiplier = sw_multiplier;
      if (!sw_hs.empty()) cfg.hs_grid = sw_hs;
      if (sw_runs) cfg.runs_per_cell = sw_runs;
      output_target out{sw_out, {}};
      if (sw_bitrate->parsed()) {
        if (!sw_tokens.empty()) cfg.bitrate_tokens = sw_tokens.front();
        const auto rows = run_bitrate_sweep(corpus, cfg);
        write_bitrate_csv(out.stream(), rows);
      } else if (sw_detection->parsed()) {
        if (!sw_tokens.empty()) cfg.n_tokens_grid = sw_tokens;
        if (sw_large) cfg.n_tokens_grid.push_back(1000000);
        const auto rows = run_detection_sweep(corpus, cfg);
        write_detection_csv(out.stream(), rows);
      } else if (sw_saferate->parsed()) {
        std::vector<std::size_t> grid = sw_tokens.empty() ? std::vector<std::size_t>{1000, 10000, 100000} : sw_tokens;
        if (sw_large) grid.push_back(1000000);
        const auto rows = run_safe_rate(corpus, grid, cfg);
        write_safe_rate_csv(out.stream(), rows);
      } else if (sw_qq->parsed()) {
        const std::vector<double> hs = sw_hs.empty() ? std::vector<double>{0.995, 0.997, 0.999} : sw_hs;
        const std::size_t n = sw_tokens.empty() ? (sw_large ? 1000000 : 10000) : sw_tokens.front();
        const std::size_t runs = sw_runs ? sw_runs : 100;
        const auto series = run_qq(corpus, hs, runs, n, cfg.seed, cfg.threads);
        write_qq_csv(out.stream(), series);
      }
    }
  } catch (const truncation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const desync_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
