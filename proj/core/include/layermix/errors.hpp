#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace layermix {

// Invalid user-supplied configuration (bad scheme string, out-of-range field,
// negative penalty, ...). Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class FormatErrorKind {
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kNonFinite,
  kMalformed,
};

const char* to_string(FormatErrorKind kind);

// Malformed binary payload. `offset` is the byte position where decoding
// failed; for truncation, `expected`/`actual` carry the byte lengths.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, std::uint64_t offset, const std::string& what,
              std::uint64_t expected = 0, std::uint64_t actual = 0);

  FormatErrorKind kind() const { return kind_; }
  std::uint64_t offset() const { return offset_; }
  std::uint64_t expected() const { return expected_; }
  std::uint64_t actual() const { return actual_; }

 private:
  FormatErrorKind kind_;
  std::uint64_t offset_;
  std::uint64_t expected_;
  std::uint64_t actual_;
};

// Text-format error with a 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class AlignError : public std::runtime_error {
 public:
  AlignError(std::size_t sentence, const std::string& what)
      : std::runtime_error("sentence " + std::to_string(sentence) + ": " + what),
        sentence_(sentence) {}
  std::size_t sentence() const { return sentence_; }

 private:
  std::size_t sentence_;
};

// Dimension disagreement between arguments of a numeric routine.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss during training. Maps to CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(int epoch, int batch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ": " + what),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace layermix
