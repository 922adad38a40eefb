#include "layermix/metrics.hpp"

#include <algorithm>
#include <iterator>
#include <optional>

#include "layermix/errors.hpp"

namespace layermix {

namespace {

void check_shapes(const TagSequences& gold, const TagSequences& pred) {
  if (gold.size() != pred.size()) {
    throw ShapeError("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                     std::to_string(pred.size()));
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw ShapeError("sentence " + std::to_string(i) + " length differs between gold and prediction");
    }
  }
}

}  // namespace

double token_accuracy(const TagSequences& gold, const TagSequences& pred) {
  check_shapes(gold, pred);
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      ++total;
      if (gold[i][t] == pred[i][t]) ++correct;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<Span> extract_spans(const std::vector<std::string>& tags) {
  std::vector<Span> spans;
  std::optional<Span> open;
  auto close = [&](std::size_t at) {
    if (open) {
      open->end = at;
      spans.push_back(std::move(*open));
      open.reset();
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& tag = tags[i];
    const bool begin = tag.size() > 2 && tag.starts_with("B-");
    const bool inside = tag.size() > 2 && tag.starts_with("I-");
    if (!begin && !inside) {
      close(i);
      continue;
    }
    std::string label = tag.substr(2);
    if (inside && open && open->label == label) continue;
    close(i);
    open = Span{std::move(label), i, 0};
  }
  close(tags.size());
  return spans;
}

Score chunk_f1(const TagSequences& gold, const TagSequences& pred) {
  check_shapes(gold, pred);
  Score s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto g = extract_spans(gold[i]);
    auto p = extract_spans(pred[i]);
    s.gold += g.size();
    s.predicted += p.size();
    std::sort(g.begin(), g.end());
    std::sort(p.begin(), p.end());
    std::vector<Span> common;
    std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(common));
    s.correct += common.size();
  }
  s.precision = s.predicted ? static_cast<double>(s.correct) / static_cast<double>(s.predicted) : 0.0;
  s.recall = s.gold ? static_cast<double>(s.correct) / static_cast<double>(s.gold) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

}  // namespace layermix
