#pragma once

#include <span>
#include <vector>

#include "layermix/tensor.hpp"

namespace layermix {

// Linear-chain CRF over T tags. All dynamic programming runs in double
// precision log space regardless of the precision the emissions came from.
struct CrfParams {
  Eigen::MatrixXd transitions;  // T x T, transitions(a, b) scores a -> b
  Eigen::VectorXd start;        // T
  Eigen::VectorXd end;          // T

  Eigen::Index num_tags() const { return start.size(); }
  static CrfParams zeros(Eigen::Index num_tags);
};

// Emissions are n x T: row i holds the tag scores of position i.
using EmissionMatrix = Eigen::MatrixXd;

double score_sequence(const EmissionMatrix& emissions, const CrfParams& crf,
                      std::span<const int> tags);

double log_partition(const EmissionMatrix& emissions, const CrfParams& crf);

struct CrfNll {
  double loss = 0.0;
  EmissionMatrix grad_emissions;
  CrfParams grad;
  // Per-position tag marginals (n x T).
  Eigen::MatrixXd marginals;
};

// loss = log Z - score(gold), gradients from forward-backward marginals.
CrfNll nll_and_grad(const EmissionMatrix& emissions, const CrfParams& crf,
                    std::span<const int> gold);

struct ViterbiResult {
  std::vector<int> tags;
  double score = 0.0;
};

// Highest-scoring tag sequence. On ties the lower tag index wins at every
// backtrack step; `score` is score_sequence of the returned tags.
ViterbiResult viterbi_decode(const EmissionMatrix& emissions, const CrfParams& crf);

}  // namespace layermix
