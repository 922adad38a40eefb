#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "layermix/crf.hpp"

namespace layermix::testing {

// Direct re-summation of a path score.
inline double sum_path(const Eigen::MatrixXd& e, const CrfParams& crf, const std::vector<int>& y) {
  double s = crf.start(y.front()) + crf.end(y.back());
  for (std::size_t i = 0; i < y.size(); ++i) s += e(static_cast<Eigen::Index>(i), y[i]);
  for (std::size_t i = 1; i < y.size(); ++i) s += crf.transitions(y[i - 1], y[i]);
  return s;
}

struct BruteForce {
  double log_z = 0.0;
  double best = -std::numeric_limits<double>::infinity();
};

// Enumerates all T^n paths. Paths are scored with score_sequence (itself
// checked against sum_path) so the maximum is comparable bit for bit.
inline BruteForce brute_force(const Eigen::MatrixXd& e, const CrfParams& crf) {
  const auto n = static_cast<std::size_t>(e.rows());
  const auto T = static_cast<int>(e.cols());
  std::vector<int> y(n, 0);
  std::vector<double> scores;
  while (true) {
    scores.push_back(score_sequence(e, crf, y));
    std::size_t k = 0;
    while (k < n && ++y[k] == T) y[k++] = 0;
    if (k == n) break;
  }
  BruteForce r;
  for (double s : scores) r.best = std::max(r.best, s);
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - r.best);
  r.log_z = r.best + std::log(acc);
  return r;
}

}  // namespace layermix::testing
