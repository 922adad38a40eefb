#include "layermix/crf.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "layermix/errors.hpp"

namespace layermix {

CrfParams CrfParams::zeros(Eigen::Index num_tags) {
  return {Eigen::MatrixXd::Zero(num_tags, num_tags), Eigen::VectorXd::Zero(num_tags),
          Eigen::VectorXd::Zero(num_tags)};
}

namespace {

void check_instance(const EmissionMatrix& e, const CrfParams& crf) {
  const auto T = crf.num_tags();
  if (T < 1) throw ShapeError("CRF needs at least one tag");
  if (crf.transitions.rows() != T || crf.transitions.cols() != T || crf.end.size() != T) {
    throw ShapeError("inconsistent CRF parameter shapes");
  }
  if (e.rows() < 1) throw ShapeError("CRF needs at least one position");
  if (e.cols() != T) {
    throw ShapeError("emissions have " + std::to_string(e.cols()) + " tag columns, CRF has " +
                     std::to_string(T));
  }
}

void check_tags(const EmissionMatrix& e, std::span<const int> tags) {
  if (static_cast<Eigen::Index>(tags.size()) != e.rows()) {
    throw ShapeError("tag sequence length " + std::to_string(tags.size()) +
                     " differs from emission length " + std::to_string(e.rows()));
  }
  for (int t : tags) {
    if (t < 0 || t >= e.cols()) throw ShapeError("tag index " + std::to_string(t) + " out of range");
  }
}

template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// alpha(i, t): log-sum of scores of all prefixes ending in tag t at i,
// including start and emissions up to i.
Eigen::MatrixXd forward_table(const EmissionMatrix& e, const CrfParams& crf) {
  const auto n = e.rows();
  const auto T = e.cols();
  Eigen::MatrixXd alpha(n, T);
  alpha.row(0) = crf.start.transpose() + e.row(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index b = 0; b < T; ++b) {
      alpha(i, b) = log_sum_exp(alpha.row(i - 1).transpose() + crf.transitions.col(b)) + e(i, b);
    }
  }
  return alpha;
}

// beta(i, t): log-sum of scores of all suffixes after i given tag t at i,
// including end but excluding emission i.
Eigen::MatrixXd backward_table(const EmissionMatrix& e, const CrfParams& crf) {
  const auto n = e.rows();
  const auto T = e.cols();
  Eigen::MatrixXd beta(n, T);
  beta.row(n - 1) = crf.end.transpose();
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    const Eigen::VectorXd next = e.row(i + 1).transpose() + beta.row(i + 1).transpose();
    for (Eigen::Index a = 0; a < T; ++a) {
      beta(i, a) = log_sum_exp(crf.transitions.row(a).transpose() + next);
    }
  }
  return beta;
}

}  // namespace

double score_sequence(const EmissionMatrix& emissions, const CrfParams& crf,
                      std::span<const int> tags) {
  check_instance(emissions, crf);
  check_tags(emissions, tags);
  const auto n = tags.size();
  double s = crf.start[tags[0]];
  for (std::size_t i = 0; i < n; ++i) {
    s += emissions(static_cast<Eigen::Index>(i), tags[i]);
    if (i + 1 < n) s += crf.transitions(tags[i], tags[i + 1]);
  }
  s += crf.end[tags[n - 1]];
  return s;
}

double log_partition(const EmissionMatrix& emissions, const CrfParams& crf) {
  check_instance(emissions, crf);
  const auto alpha = forward_table(emissions, crf);
  return log_sum_exp(alpha.row(emissions.rows() - 1).transpose() + crf.end);
}

CrfNll nll_and_grad(const EmissionMatrix& emissions, const CrfParams& crf,
                    std::span<const int> gold) {
  check_instance(emissions, crf);
  check_tags(emissions, gold);
  const auto n = emissions.rows();
  const auto T = emissions.cols();
  const auto alpha = forward_table(emissions, crf);
  const auto beta = backward_table(emissions, crf);
  const double log_z = log_sum_exp(alpha.row(n - 1).transpose() + crf.end);

  CrfNll out;
  out.loss = log_z - score_sequence(emissions, crf, gold);
  out.marginals = ((alpha + beta).array() - log_z).exp().matrix();
  out.grad_emissions = out.marginals;
  out.grad = CrfParams::zeros(T);
  out.grad.start = out.marginals.row(0).transpose();
  out.grad.end = out.marginals.row(n - 1).transpose();
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    for (Eigen::Index a = 0; a < T; ++a) {
      for (Eigen::Index b = 0; b < T; ++b) {
        out.grad.transitions(a, b) += std::exp(alpha(i, a) + crf.transitions(a, b) +
                                               emissions(i + 1, b) + beta(i + 1, b) - log_z);
      }
    }
  }
  // Subtract gold indicators.
  out.grad.start[gold[0]] -= 1.0;
  out.grad.end[gold[n - 1]] -= 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.grad_emissions(i, gold[i]) -= 1.0;
    if (i + 1 < n) out.grad.transitions(gold[i], gold[i + 1]) -= 1.0;
  }
  return out;
}

ViterbiResult viterbi_decode(const EmissionMatrix& emissions, const CrfParams& crf) {
  check_instance(emissions, crf);
  const auto n = emissions.rows();
  const auto T = emissions.cols();
  Eigen::MatrixXd delta(n, T);
  Eigen::MatrixXi back(n, T);
  delta.row(0) = crf.start.transpose() + emissions.row(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index b = 0; b < T; ++b) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index a = 0; a < T; ++a) {
        const double v = delta(i - 1, a) + crf.transitions(a, b);
        if (v > best) {
          best = v;
          arg = static_cast<int>(a);
        }
      }
      delta(i, b) = best + emissions(i, b);
      back(i, b) = arg;
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  int last = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double v = delta(n - 1, t) + crf.end[t];
    if (v > best) {
      best = v;
      last = static_cast<int>(t);
    }
  }
  ViterbiResult r;
  r.tags.resize(static_cast<std::size_t>(n));
  r.tags[n - 1] = last;
  for (Eigen::Index i = n - 1; i > 0; --i) r.tags[i - 1] = back(i, r.tags[i]);
  r.score = score_sequence(emissions, crf, r.tags);
  return r;
}

}  // namespace layermix
