#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "layermix/embedstore.hpp"
#include "layermix/tensor.hpp"

namespace layermix {

// Rule for combining the L layer vectors of a token into one input vector.
//
//   layer:<l>           the vector of layer l alone
//   concat              [h_0; ...; h_{L-1}]
//   avg                 (1/L) sum_j h_j
//   wavg:<i,j,...>      gamma * sum_{j in S} softmax(w)_j h_j
//
// "wavg" over every layer is the usual scalar mix; a proper subset such as
// "wavg:0,1" drops the remaining layers entirely.
class MixScheme {
 public:
  enum class Kind { kIndividual, kConcat, kFixedAverage, kLearnedWeighted };

  static MixScheme individual(int layer);
  static MixScheme concat();
  static MixScheme fixed_average();
  static MixScheme learned_weighted(std::vector<int> active);

  // Throws ConfigError on a malformed string. Layer indices are only
  // range-checked by validate(), once L is known.
  static MixScheme parse(std::string_view text);

  // Throws ConfigError if a layer index falls outside [0, num_layers).
  void validate(int num_layers) const;

  Kind kind() const { return kind_; }
  int layer() const { return layer_; }
  const std::vector<int>& active() const { return active_; }
  bool has_params() const { return kind_ == Kind::kLearnedWeighted; }

  std::string to_string() const;

  bool operator==(const MixScheme&) const = default;

 private:
  MixScheme(Kind kind, int layer, std::vector<int> active)
      : kind_(kind), layer_(layer), active_(std::move(active)) {}

  Kind kind_;
  int layer_;
  std::vector<int> active_;
};

// Learnable parameters of a LearnedWeighted scheme: one logit per active
// layer and a global scale. Other schemes carry empty logits.
template <typename S>
struct MixParams {
  Vector<S> logits;
  S gamma = S(1);

  // w = 0 (uniform weights), gamma = 1.
  static MixParams initial(const MixScheme& scheme);
};

template <typename S>
struct MixGrad {
  Matrix<S> layers;  // L x D
  Vector<S> logits;
  S gamma = S(0);
};

template <typename S>
struct PenaltyResult {
  S loss = S(0);
  Vector<S> grad;
};

// Numerically stable (max-subtracted) softmax.
template <typename S>
Vector<S> softmax(const Vector<S>& logits);

int output_dim(const MixScheme& scheme, int num_layers, int dim);

// H is L x D, one layer per row.
template <typename S>
Vector<S> mix_forward(const Matrix<S>& layers, const MixScheme& scheme, const MixParams<S>& params);

template <typename S>
MixGrad<S> mix_backward(const Vector<S>& grad_out, const Matrix<S>& layers,
                        const MixScheme& scheme, const MixParams<S>& params);

// lambda * ||w||^2 on the logits. Throws ConfigError for lambda < 0.
template <typename S>
PenaltyResult<S> logit_penalty(const MixParams<S>& params, S lambda);

// Token-by-token mixing of a whole sentence; returns output_dim x n.
template <typename S>
Matrix<S> mix_sentence(const SentenceEmbedding& sentence, const MixScheme& scheme,
                       const MixParams<S>& params);

// Accumulates parameter gradients for mix_sentence into `grad` given the
// gradient with respect to its output. No-op for parameter-free schemes.
template <typename S>
void mix_sentence_backward(const Matrix<S>& grad_out, const SentenceEmbedding& sentence,
                           const MixScheme& scheme, const MixParams<S>& params,
                           MixParams<S>& grad);

// L x D matrix for one token of a sentence.
template <typename S>
Matrix<S> token_layers(const SentenceEmbedding& sentence, std::size_t token);

}  // namespace layermix
