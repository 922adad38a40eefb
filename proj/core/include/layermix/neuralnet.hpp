#pragma once

#include "layermix/rng.hpp"
#include "layermix/tensor.hpp"

namespace layermix {

// ---------------------------------------------------------------------------
// Linear layer: y = W x + b.

template <typename S>
struct LinearParams {
  Matrix<S> weight;  // out x in
  Vector<S> bias;    // out

  Eigen::Index out_dim() const { return weight.rows(); }
  Eigen::Index in_dim() const { return weight.cols(); }

  static LinearParams zeros(Eigen::Index out, Eigen::Index in);
  // uniform(-r, r), r = 1/sqrt(in); zero bias.
  static LinearParams random(Eigen::Index out, Eigen::Index in, Rng& rng);
};

template <typename S>
struct LinearGrad {
  Matrix<S> weight;
  Vector<S> bias;
  Vector<S> input;
};

template <typename S>
Vector<S> linear_forward(const Vector<S>& x, const LinearParams<S>& params);

template <typename S>
LinearGrad<S> linear_backward(const Vector<S>& x, const LinearParams<S>& params,
                              const Vector<S>& grad_out);

// Column-wise application over a sequence (in x n -> out x n).
template <typename S>
Matrix<S> linear_forward_seq(const Matrix<S>& x, const LinearParams<S>& params);

// Accumulates weight/bias gradients into `grad`, returns d(input).
template <typename S>
Matrix<S> linear_backward_seq(const Matrix<S>& x, const LinearParams<S>& params,
                              const Matrix<S>& grad_out, LinearParams<S>& grad);

// ---------------------------------------------------------------------------
// LSTM. Gate blocks are stacked as (input, forget, cell, output), each of
// height h, in both weight matrices and the bias.

template <typename S>
struct LstmParams {
  Matrix<S> w_input;      // 4h x in
  Matrix<S> w_recurrent;  // 4h x h
  Vector<S> bias;         // 4h

  Eigen::Index hidden() const { return w_recurrent.cols(); }
  Eigen::Index input_dim() const { return w_input.cols(); }

  static LstmParams zeros(Eigen::Index in, Eigen::Index hidden);
  // uniform(-r, r) with r = 1/sqrt(fan_in) per matrix, zero bias except the
  // forget block which starts at +1.
  static LstmParams random(Eigen::Index in, Eigen::Index hidden, Rng& rng);
};

template <typename S>
struct LstmStep {
  Vector<S> h;
  Vector<S> c;
  // Post-activation gate values.
  Vector<S> i, f, g, o;
};

template <typename S>
struct LstmStepGrad {
  Vector<S> input;
  Vector<S> h_prev;
  Vector<S> c_prev;
};

template <typename S>
LstmStep<S> lstm_step(const Vector<S>& x, const Vector<S>& h_prev, const Vector<S>& c_prev,
                      const LstmParams<S>& params);

// Backward through one step given d(h) and d(c). Parameter gradients are
// accumulated into `grad`.
template <typename S>
LstmStepGrad<S> lstm_step_backward(const LstmStep<S>& step, const Vector<S>& x,
                                   const Vector<S>& h_prev, const Vector<S>& c_prev,
                                   const LstmParams<S>& params, const Vector<S>& grad_h,
                                   const Vector<S>& grad_c, LstmParams<S>& grad);

// Activations of one unidirectional pass, kept for BPTT.
template <typename S>
struct LstmSequenceCache {
  Matrix<S> input;         // in x n
  Matrix<S> gates;         // 4h x n, post-activation
  Matrix<S> cells;         // h x n
  Matrix<S> hidden;        // h x n
  Matrix<S> recurrent_in;  // h x n, masked h_{t-1} fed to step t
  Matrix<S> recurrent_mask;  // h x n or empty
};

// Runs left to right from zero state. When `recurrent_mask` is non-empty,
// column t multiplies h_{t-1} before it enters step t.
template <typename S>
LstmSequenceCache<S> lstm_sequence_forward(const Matrix<S>& input, const LstmParams<S>& params,
                                           const Matrix<S>& recurrent_mask = {});

template <typename S>
Matrix<S> lstm_sequence_backward(const LstmSequenceCache<S>& cache, const LstmParams<S>& params,
                                 const Matrix<S>& grad_hidden, LstmParams<S>& grad);

// ---------------------------------------------------------------------------
// Bidirectional LSTM: output column t is [h_fwd(t); h_bwd(t)], where the
// backward LSTM reads the sequence right to left.

template <typename S>
struct BiLstmParams {
  LstmParams<S> forward;
  LstmParams<S> backward;

  static BiLstmParams zeros(Eigen::Index in, Eigen::Index hidden);
  static BiLstmParams random(Eigen::Index in, Eigen::Index hidden, Rng& rng);
};

template <typename S>
struct BiLstmMasks {
  Matrix<S> forward;   // h x n in the forward direction's processing order, or empty
  Matrix<S> backward;  // h x n in the backward direction's processing order, or empty
};

template <typename S>
struct BiLstmCache {
  LstmSequenceCache<S> forward;
  LstmSequenceCache<S> backward;  // over the reversed sequence
  Matrix<S> output;               // 2h x n
};

// Throws ShapeError for an empty sequence.
template <typename S>
BiLstmCache<S> bilstm_forward(const Matrix<S>& input, const BiLstmParams<S>& params,
                              const BiLstmMasks<S>& masks = {});

template <typename S>
Matrix<S> bilstm_backward(const BiLstmCache<S>& cache, const BiLstmParams<S>& params,
                          const Matrix<S>& grad_output, BiLstmParams<S>& grad);

// ---------------------------------------------------------------------------
// Dropout.

struct DropoutSpec {
  double rate = 0.5;
  // Variational: one mask per sequence, reused at every time step.
  bool variational = true;

  // Throws ConfigError unless 0 <= rate < 1.
  void validate() const;
};

// Inverted-dropout mask: each entry is 0 with probability p, else 1/(1-p).
template <typename S>
Vector<S> sample_variational_mask(Eigen::Index size, double p, Rng& rng);

// size x steps mask. Variational specs repeat one sampled column; otherwise
// every column is drawn independently.
template <typename S>
Matrix<S> sample_dropout_mask(Eigen::Index size, Eigen::Index steps, const DropoutSpec& spec,
                              Rng& rng);

}  // namespace layermix
