#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace layermix {

using TagSequences = std::vector<std::vector<std::string>>;

struct Span {
  std::string label;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive

  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

struct Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;
};

// Throws ShapeError when sentence counts or lengths differ.
double token_accuracy(const TagSequences& gold, const TagSequences& pred);

// Chunks of a BIO sequence. A bare I-X opens a chunk like B-X does. Tags that
// are neither O nor B-/I- prefixed are treated as O.
std::vector<Span> extract_spans(const std::vector<std::string>& tags);

// Exact-match micro P/R/F1 over (label, start, end) chunks.
Score chunk_f1(const TagSequences& gold, const TagSequences& pred);

}  // namespace layermix
