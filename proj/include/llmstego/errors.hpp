#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace llmstego {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class invalid_input : public error {
 public:
  using error::error;
};

/// The token stream and the distribution source disagree: the token is not
/// in the distribution the receiver computed, or the source ended early.
class desync_error : public error {
 public:
  using error::error;
};

/// The framed message did not fit into the token budget.
class truncation_error : public error {
 public:
  truncation_error(std::size_t bits_embedded, std::size_t frame_bits)
      : error("message truncated: embedded " + std::to_string(bits_embedded) + " of " +
              std::to_string(frame_bits) + " frame bits"),
        bits_embedded_(bits_embedded),
        frame_bits_(frame_bits) {}

  std::size_t bits_embedded() const noexcept { return bits_embedded_; }
  std::size_t frame_bits() const noexcept { return frame_bits_; }

 private:
  std::size_t bits_embedded_;
  std::size_t frame_bits_;
};

class frame_error : public error {
 public:
  enum class kind { incomplete, length_exceeds_capacity };

  frame_error(kind k, const std::string& what) : error(what), kind_(k) {}
  kind reason() const noexcept { return kind_; }

 private:
  kind kind_;
};

/// Corpus file parse/validation failure. `record` is -1 for header errors.
class corpus_format_error : public error {
 public:
  corpus_format_error(const std::string& what, std::uint64_t offset, std::int64_t record = -1)
      : error(what + " (offset " + std::to_string(offset) +
              (record >= 0 ? ", record " + std::to_string(record) : std::string()) + ")"),
        offset_(offset),
        record_(record) {}

  std::uint64_t offset() const noexcept { return offset_; }
  std::int64_t record() const noexcept { return record_; }

 private:
  std::uint64_t offset_;
  std::int64_t record_;
};

class source_error : public error {
 public:
  using error::error;
};

}  // namespace llmstego
