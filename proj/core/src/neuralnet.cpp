#include "layermix/neuralnet.hpp"

#include <cmath>
#include <string>

#include "layermix/errors.hpp"

namespace layermix {

namespace {

template <typename S>
void fill_uniform(Matrix<S>& m, double r, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<S>(rng.uniform(-r, r));
  }
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return S(1) / (S(1) + (-x).exp());
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear

template <typename S>
LinearParams<S> LinearParams<S>::zeros(Eigen::Index out, Eigen::Index in) {
  return {Matrix<S>::Zero(out, in), Vector<S>::Zero(out)};
}

template <typename S>
LinearParams<S> LinearParams<S>::random(Eigen::Index out, Eigen::Index in, Rng& rng) {
  auto p = zeros(out, in);
  fill_uniform(p.weight, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  return p;
}

template <typename S>
Vector<S> linear_forward(const Vector<S>& x, const LinearParams<S>& params) {
  if (x.size() != params.in_dim()) {
    throw ShapeError("linear input has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(params.in_dim()));
  }
  return params.weight * x + params.bias;
}

template <typename S>
LinearGrad<S> linear_backward(const Vector<S>& x, const LinearParams<S>& params,
                              const Vector<S>& grad_out) {
  if (x.size() != params.in_dim() || grad_out.size() != params.out_dim()) {
    throw ShapeError("linear backward shape mismatch");
  }
  return {grad_out * x.transpose(), grad_out, params.weight.transpose() * grad_out};
}

template <typename S>
Matrix<S> linear_forward_seq(const Matrix<S>& x, const LinearParams<S>& params) {
  if (x.rows() != params.in_dim()) throw ShapeError("linear input has wrong feature size");
  Matrix<S> y(params.out_dim(), x.cols());
  y.noalias() = params.weight * x;
  y.colwise() += params.bias;
  return y;
}

template <typename S>
Matrix<S> linear_backward_seq(const Matrix<S>& x, const LinearParams<S>& params,
                              const Matrix<S>& grad_out, LinearParams<S>& grad) {
  if (x.rows() != params.in_dim() || grad_out.rows() != params.out_dim() ||
      x.cols() != grad_out.cols()) {
    throw ShapeError("linear backward shape mismatch");
  }
  grad.weight.noalias() += grad_out * x.transpose();
  grad.bias += grad_out.rowwise().sum();
  Matrix<S> dx(params.in_dim(), x.cols());
  dx.noalias() = params.weight.transpose() * grad_out;
  return dx;
}

// ---------------------------------------------------------------------------
// LSTM

template <typename S>
LstmParams<S> LstmParams<S>::zeros(Eigen::Index in, Eigen::Index hidden) {
  return {Matrix<S>::Zero(4 * hidden, in), Matrix<S>::Zero(4 * hidden, hidden),
          Vector<S>::Zero(4 * hidden)};
}

template <typename S>
LstmParams<S> LstmParams<S>::random(Eigen::Index in, Eigen::Index hidden, Rng& rng) {
  auto p = zeros(in, hidden);
  fill_uniform(p.w_input, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  fill_uniform(p.w_recurrent, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  p.bias.segment(hidden, hidden).setOnes();
  return p;
}

namespace {

template <typename S>
void check_lstm_shapes(const LstmParams<S>& p, Eigen::Index in) {
  const auto h = p.hidden();
  if (p.w_input.rows() != 4 * h || p.w_recurrent.rows() != 4 * h || p.bias.size() != 4 * h) {
    throw ShapeError("inconsistent LSTM parameter shapes");
  }
  if (in != p.input_dim()) {
    throw ShapeError("LSTM input has " + std::to_string(in) + " features, expected " +
                     std::to_string(p.input_dim()));
  }
}

// Activates a 4h pre-activation block in place: sigmoid on i, f, o; tanh on g.
template <typename Derived>
void activate_gates(Eigen::MatrixBase<Derived>& z, Eigen::Index h) {
  z.segment(0, 2 * h) = sigmoid(z.segment(0, 2 * h).array()).matrix();
  z.segment(2 * h, h) = z.segment(2 * h, h).array().tanh().matrix();
  z.segment(3 * h, h) = sigmoid(z.segment(3 * h, h).array()).matrix();
}

}  // namespace

template <typename S>
LstmStep<S> lstm_step(const Vector<S>& x, const Vector<S>& h_prev, const Vector<S>& c_prev,
                      const LstmParams<S>& params) {
  check_lstm_shapes(params, x.size());
  const auto h = params.hidden();
  if (h_prev.size() != h || c_prev.size() != h) throw ShapeError("LSTM state has wrong size");
  Vector<S> z = params.w_input * x + params.w_recurrent * h_prev + params.bias;
  activate_gates(z, h);
  LstmStep<S> out;
  out.i = z.segment(0, h);
  out.f = z.segment(h, h);
  out.g = z.segment(2 * h, h);
  out.o = z.segment(3 * h, h);
  out.c = (out.f.array() * c_prev.array() + out.i.array() * out.g.array()).matrix();
  out.h = (out.o.array() * out.c.array().tanh()).matrix();
  return out;
}

template <typename S>
LstmStepGrad<S> lstm_step_backward(const LstmStep<S>& step, const Vector<S>& x,
                                   const Vector<S>& h_prev, const Vector<S>& c_prev,
                                   const LstmParams<S>& params, const Vector<S>& grad_h,
                                   const Vector<S>& grad_c, LstmParams<S>& grad) {
  check_lstm_shapes(params, x.size());
  const auto h = params.hidden();
  const auto tc = step.c.array().tanh();
  const auto dc = (grad_c.array() + grad_h.array() * step.o.array() * (S(1) - tc * tc)).eval();
  Vector<S> dz(4 * h);
  dz.segment(0, h) = (dc * step.g.array() * step.i.array() * (S(1) - step.i.array())).matrix();
  dz.segment(h, h) = (dc * c_prev.array() * step.f.array() * (S(1) - step.f.array())).matrix();
  dz.segment(2 * h, h) =
      (dc * step.i.array() * (S(1) - step.g.array() * step.g.array())).matrix();
  dz.segment(3 * h, h) =
      (grad_h.array() * tc * step.o.array() * (S(1) - step.o.array())).matrix();

  grad.w_input.noalias() += dz * x.transpose();
  grad.w_recurrent.noalias() += dz * h_prev.transpose();
  grad.bias += dz;
  return {params.w_input.transpose() * dz, params.w_recurrent.transpose() * dz,
          (dc * step.f.array()).matrix()};
}

template <typename S>
LstmSequenceCache<S> lstm_sequence_forward(const Matrix<S>& input, const LstmParams<S>& params,
                                           const Matrix<S>& recurrent_mask) {
  check_lstm_shapes(params, input.rows());
  const auto h = params.hidden();
  const auto n = input.cols();
  if (recurrent_mask.size() != 0 && (recurrent_mask.rows() != h || recurrent_mask.cols() != n)) {
    throw ShapeError("recurrent dropout mask has wrong shape");
  }
  LstmSequenceCache<S> cache;
  cache.input = input;
  cache.recurrent_mask = recurrent_mask;
  cache.gates.resize(4 * h, n);
  cache.gates.noalias() = params.w_input * input;
  cache.gates.colwise() += params.bias;
  cache.cells.resize(h, n);
  cache.hidden.resize(h, n);
  cache.recurrent_in.resize(h, n);

  Vector<S> c_prev = Vector<S>::Zero(h);
  for (Eigen::Index t = 0; t < n; ++t) {
    if (t == 0) {
      cache.recurrent_in.col(0).setZero();
    } else if (recurrent_mask.size() != 0) {
      cache.recurrent_in.col(t) =
          (cache.hidden.col(t - 1).array() * recurrent_mask.col(t).array()).matrix();
    } else {
      cache.recurrent_in.col(t) = cache.hidden.col(t - 1);
    }
    auto z = cache.gates.col(t);
    if (t > 0) z.noalias() += params.w_recurrent * cache.recurrent_in.col(t);
    activate_gates(z, h);
    cache.cells.col(t) = (z.segment(h, h).array() * c_prev.array() +
                          z.segment(0, h).array() * z.segment(2 * h, h).array())
                             .matrix();
    cache.hidden.col(t) =
        (z.segment(3 * h, h).array() * cache.cells.col(t).array().tanh()).matrix();
    c_prev = cache.cells.col(t);
  }
  return cache;
}

template <typename S>
Matrix<S> lstm_sequence_backward(const LstmSequenceCache<S>& cache, const LstmParams<S>& params,
                                 const Matrix<S>& grad_hidden, LstmParams<S>& grad) {
  const auto h = params.hidden();
  const auto n = cache.input.cols();
  if (grad_hidden.rows() != h || grad_hidden.cols() != n) {
    throw ShapeError("LSTM hidden gradient has wrong shape");
  }
  Matrix<S> dz(4 * h, n);
  Vector<S> dh_next = Vector<S>::Zero(h);
  Vector<S> dc_next = Vector<S>::Zero(h);
  Vector<S> dc(h);
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const auto gates = cache.gates.col(t);
    const auto i = gates.segment(0, h).array();
    const auto f = gates.segment(h, h).array();
    const auto g = gates.segment(2 * h, h).array();
    const auto o = gates.segment(3 * h, h).array();
    const auto tc = cache.cells.col(t).array().tanh().eval();
    const auto dh = (grad_hidden.col(t) + dh_next).array().eval();
    dc = (dc_next.array() + dh * o * (S(1) - tc * tc)).matrix();
    auto col = dz.col(t);
    col.segment(0, h) = (dc.array() * g * i * (S(1) - i)).matrix();
    if (t > 0) {
      col.segment(h, h) = (dc.array() * cache.cells.col(t - 1).array() * f * (S(1) - f)).matrix();
    } else {
      col.segment(h, h).setZero();
    }
    col.segment(2 * h, h) = (dc.array() * i * (S(1) - g * g)).matrix();
    col.segment(3 * h, h) = (dh * tc * o * (S(1) - o)).matrix();

    dc_next = (dc.array() * f).matrix();
    if (t > 0) {
      dh_next.noalias() = params.w_recurrent.transpose() * col;
      if (cache.recurrent_mask.size() != 0) {
        dh_next = (dh_next.array() * cache.recurrent_mask.col(t).array()).matrix();
      }
    }
  }
  grad.w_input.noalias() += dz * cache.input.transpose();
  // Column 0 of recurrent_in is zero, so including it is harmless.
  grad.w_recurrent.noalias() += dz * cache.recurrent_in.transpose();
  grad.bias += dz.rowwise().sum();
  Matrix<S> dx(params.input_dim(), n);
  dx.noalias() = params.w_input.transpose() * dz;
  return dx;
}

// ---------------------------------------------------------------------------
// BiLSTM

template <typename S>
BiLstmParams<S> BiLstmParams<S>::zeros(Eigen::Index in, Eigen::Index hidden) {
  return {LstmParams<S>::zeros(in, hidden), LstmParams<S>::zeros(in, hidden)};
}

template <typename S>
BiLstmParams<S> BiLstmParams<S>::random(Eigen::Index in, Eigen::Index hidden, Rng& rng) {
  auto fwd = LstmParams<S>::random(in, hidden, rng);
  auto bwd = LstmParams<S>::random(in, hidden, rng);
  return {std::move(fwd), std::move(bwd)};
}

template <typename S>
BiLstmCache<S> bilstm_forward(const Matrix<S>& input, const BiLstmParams<S>& params,
                              const BiLstmMasks<S>& masks) {
  if (input.cols() == 0) throw ShapeError("BiLSTM input sequence is empty");
  const auto h = params.forward.hidden();
  if (params.backward.hidden() != h) throw ShapeError("BiLSTM directions differ in hidden size");
  BiLstmCache<S> cache;
  cache.forward = lstm_sequence_forward(input, params.forward, masks.forward);
  const Matrix<S> reversed = input.rowwise().reverse();
  cache.backward = lstm_sequence_forward(reversed, params.backward, masks.backward);
  cache.output.resize(2 * h, input.cols());
  cache.output.topRows(h) = cache.forward.hidden;
  cache.output.bottomRows(h) = cache.backward.hidden.rowwise().reverse();
  return cache;
}

template <typename S>
Matrix<S> bilstm_backward(const BiLstmCache<S>& cache, const BiLstmParams<S>& params,
                          const Matrix<S>& grad_output, BiLstmParams<S>& grad) {
  const auto h = params.forward.hidden();
  if (grad_output.rows() != 2 * h || grad_output.cols() != cache.output.cols()) {
    throw ShapeError("BiLSTM output gradient has wrong shape");
  }
  Matrix<S> dx = lstm_sequence_backward<S>(cache.forward, params.forward, grad_output.topRows(h),
                                           grad.forward);
  const Matrix<S> grad_bwd = grad_output.bottomRows(h).rowwise().reverse();
  const Matrix<S> dx_rev =
      lstm_sequence_backward<S>(cache.backward, params.backward, grad_bwd, grad.backward);
  dx += dx_rev.rowwise().reverse();
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout

void DropoutSpec::validate() const {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

template <typename S>
Vector<S> sample_variational_mask(Eigen::Index size, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  Vector<S> mask(size);
  if (p == 0.0) {
    mask.setOnes();
    return mask;
  }
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < size; ++i) mask[i] = rng.bernoulli(p) ? S(0) : keep_scale;
  return mask;
}

template <typename S>
Matrix<S> sample_dropout_mask(Eigen::Index size, Eigen::Index steps, const DropoutSpec& spec,
                              Rng& rng) {
  spec.validate();
  Matrix<S> mask(size, steps);
  if (spec.variational) {
    mask.colwise() = sample_variational_mask<S>(size, spec.rate, rng);
  } else {
    for (Eigen::Index t = 0; t < steps; ++t) mask.col(t) = sample_variational_mask<S>(size, spec.rate, rng);
  }
  return mask;
}

#define LAYERMIX_INSTANTIATE(S)                                                                   \
  template struct LinearParams<S>;                                                                \
  template struct LstmParams<S>;                                                                  \
  template struct BiLstmParams<S>;                                                                \
  template Vector<S> linear_forward(const Vector<S>&, const LinearParams<S>&);                    \
  template LinearGrad<S> linear_backward(const Vector<S>&, const LinearParams<S>&,                \
                                         const Vector<S>&);                                       \
  template Matrix<S> linear_forward_seq(const Matrix<S>&, const LinearParams<S>&);                \
  template Matrix<S> linear_backward_seq(const Matrix<S>&, const LinearParams<S>&,                \
                                         const Matrix<S>&, LinearParams<S>&);                     \
  template LstmStep<S> lstm_step(const Vector<S>&, const Vector<S>&, const Vector<S>&,            \
                                 const LstmParams<S>&);                                           \
  template LstmStepGrad<S> lstm_step_backward(const LstmStep<S>&, const Vector<S>&,               \
                                              const Vector<S>&, const Vector<S>&,                 \
                                              const LstmParams<S>&, const Vector<S>&,             \
                                              const Vector<S>&, LstmParams<S>&);                  \
  template LstmSequenceCache<S> lstm_sequence_forward(const Matrix<S>&, const LstmParams<S>&,     \
                                                      const Matrix<S>&);                          \
  template Matrix<S> lstm_sequence_backward(const LstmSequenceCache<S>&, const LstmParams<S>&,    \
                                            const Matrix<S>&, LstmParams<S>&);                    \
  template BiLstmCache<S> bilstm_forward(const Matrix<S>&, const BiLstmParams<S>&,                \
                                         const BiLstmMasks<S>&);                                  \
  template Matrix<S> bilstm_backward(const BiLstmCache<S>&, const BiLstmParams<S>&,               \
                                     const Matrix<S>&, BiLstmParams<S>&);                         \
  template Vector<S> sample_variational_mask(Eigen::Index, double, Rng&);                         \
  template Matrix<S> sample_dropout_mask(Eigen::Index, Eigen::Index, const DropoutSpec&, Rng&);

LAYERMIX_INSTANTIATE(float)
LAYERMIX_INSTANTIATE(double)

#undef LAYERMIX_INSTANTIATE

}  // namespace layermix
