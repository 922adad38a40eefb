#pragma once

#include <span>
#include <vector>

#include "layermix/crf.hpp"
#include "layermix/embedstore.hpp"
#include "layermix/mixer.hpp"
#include "layermix/neuralnet.hpp"
#include "layermix/rng.hpp"

namespace layermix {

// mixer -> BiLSTM -> BiLSTM -> linear projection -> CRF.
//
// The same struct doubles as a gradient accumulator (see zeros_like()).
template <typename S>
struct TaggerModel {
  MixScheme scheme = MixScheme::fixed_average();
  int num_layers = 0;
  int dim = 0;
  int num_tags = 0;

  MixParams<S> mix;
  BiLstmParams<S> lstm1;
  BiLstmParams<S> lstm2;
  LinearParams<S> projection;  // T x 2h
  Matrix<S> transitions;       // T x T
  Vector<S> start;             // T
  Vector<S> end;               // T

  int hidden() const { return static_cast<int>(lstm1.forward.hidden()); }
  int input_dim() const { return output_dim(scheme, num_layers, dim); }

  // Draws every weight matrix from `rng` in a fixed order; CRF scores and
  // biases (apart from the forget gate) start at zero.
  static TaggerModel random(const MixScheme& scheme, int num_layers, int dim, int num_tags,
                            int hidden, Rng& rng);
  TaggerModel zeros_like() const;

  // Trainable blocks in a fixed order. Mixer logits and gamma are included
  // only for schemes with parameters.
  std::vector<std::span<S>> blocks();
  std::vector<std::span<const S>> blocks() const;
  void set_zero();

  CrfParams crf() const;
};

// Dropout masks for one sentence. Empty matrices mean "no dropout".
template <typename S>
struct TaggerMasks {
  Matrix<S> input;    // mixer output, in x n
  BiLstmMasks<S> recurrent1;
  Matrix<S> between;  // first BiLSTM output, 2h x n
  BiLstmMasks<S> recurrent2;
  Matrix<S> output;   // second BiLSTM output, 2h x n
};

template <typename S>
TaggerMasks<S> sample_tagger_masks(const TaggerModel<S>& model, Eigen::Index length,
                                   const DropoutSpec& spec, Rng& rng);

// CRF negative log-likelihood of `gold`. Gradients are added to `grad`.
template <typename S>
double tagger_loss_and_grad(const TaggerModel<S>& model, const SentenceEmbedding& sentence,
                            std::span<const int> gold, const TaggerMasks<S>& masks,
                            TaggerModel<S>& grad);

template <typename S>
double tagger_loss(const TaggerModel<S>& model, const SentenceEmbedding& sentence,
                   std::span<const int> gold, const TaggerMasks<S>& masks);

// Emission scores (n x T) in evaluation mode.
template <typename S>
EmissionMatrix tagger_emissions(const TaggerModel<S>& model, const SentenceEmbedding& sentence);

// Viterbi tags in evaluation mode (no dropout).
template <typename S>
std::vector<int> tagger_decode(const TaggerModel<S>& model, const SentenceEmbedding& sentence);

}  // namespace layermix
