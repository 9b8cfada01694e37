#pragma once

// Distribution source backed by a logits server.
//
//   POST /logits
//   request:  {"prompt": str, "history": [int], "temperature": f, "top_p": f}
//   response: {"logits": [f, ...]}            (exactly K values)
//             {"logits": [], "eos": true}     (end of sequence)
//
// The server must be deterministic in (prompt, history); otherwise the
// receiver cannot reproduce the sender's distributions.

#include <httplib.h>
#include <json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "llmstego/distribution.hpp"
#include "llmstego/errors.hpp"
#include "llmstego/source.hpp"

namespace llmstego {

struct http_source_config {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string path = "/logits";
  std::string prompt;
  std::size_t vocab_size = 32000;
  sampler_config sampler;
  int timeout_seconds = 30;
};

inline nlohmann::json logits_request(const http_source_config& cfg, std::span<const token_id> history) {
  return {{"prompt", cfg.prompt},
          {"history", std::vector<token_id>(history.begin(), history.end())},
          {"temperature", cfg.sampler.temperature},
          {"top_p", cfg.sampler.top_p}};
}

/// Parses a /logits response body. Returns nullopt on end of sequence.
inline std::optional<logit_vector> parse_logits_response(const std::string& body, std::size_t vocab_size) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw source_error(std::string("malformed logits response: ") + e.what());
  }
  if (!j.is_object()) throw source_error("malformed logits response: not an object");
  if (j.value("eos", false)) return std::nullopt;
  const auto it = j.find("logits");
  if (it == j.end() || !it->is_array()) throw source_error("malformed logits response: missing logits array");
  if (it->size() != vocab_size)
    throw source_error("vocabulary size mismatch: expected " + std::to_string(vocab_size) + " logits, got " +
                       std::to_string(it->size()));
  std::vector<double> values;
  values.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw source_error("malformed logits response: non-numeric logit");
    values.push_back(v.get<double>());
  }
  try {
    return logit_vector(std::move(values));
  } catch (const invalid_input& e) {
    throw source_error(std::string("malformed logits response: ") + e.what());
  }
}

class http_logits_source final : public distribution_source {
 public:
  explicit http_logits_source(http_source_config cfg) : cfg_(std::move(cfg)), client_(cfg_.host, cfg_.port) {
    cfg_.sampler.validate();
    client_.set_connection_timeout(cfg_.timeout_seconds, 0);
    client_.set_read_timeout(cfg_.timeout_seconds, 0);
  }

  /// Raw logits for the next position; nullopt at end of sequence.
  std::optional<logit_vector> fetch_logits(std::span<const token_id> history) {
    const auto body = logits_request(cfg_, history).dump();
    auto res = client_.Post(cfg_.path, body, "application/json");
    if (!res) throw source_error("logits request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw source_error("logits server returned HTTP " + std::to_string(res->status));
    return parse_logits_response(res->body, cfg_.vocab_size);
  }

  std::optional<token_distribution> next(std::span<const token_id> history) override {
    auto logits = fetch_logits(history);
    if (!logits) return std::nullopt;
    return preprocess_logits(*logits, cfg_.sampler);
  }

 private:
  http_source_config cfg_;
  httplib::Client client_;
};

}  // namespace llmstego
