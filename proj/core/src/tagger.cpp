#include "layermix/tagger.hpp"

#include "layermix/errors.hpp"

namespace layermix {

template <typename S>
TaggerModel<S> TaggerModel<S>::random(const MixScheme& scheme, int num_layers, int dim,
                                      int num_tags, int hidden, Rng& rng) {
  scheme.validate(num_layers);
  if (dim < 1 || num_tags < 1 || hidden < 1) {
    throw ConfigError("tagger needs dim, num_tags and hidden size >= 1");
  }
  TaggerModel m;
  m.scheme = scheme;
  m.num_layers = num_layers;
  m.dim = dim;
  m.num_tags = num_tags;
  m.mix = MixParams<S>::initial(scheme);
  const int in = output_dim(scheme, num_layers, dim);
  m.lstm1 = BiLstmParams<S>::random(in, hidden, rng);
  m.lstm2 = BiLstmParams<S>::random(2 * hidden, hidden, rng);
  m.projection = LinearParams<S>::random(num_tags, 2 * hidden, rng);
  m.transitions = Matrix<S>::Zero(num_tags, num_tags);
  m.start = Vector<S>::Zero(num_tags);
  m.end = Vector<S>::Zero(num_tags);
  return m;
}

template <typename S>
TaggerModel<S> TaggerModel<S>::zeros_like() const {
  TaggerModel z = *this;
  z.set_zero();
  return z;
}

namespace {

template <typename S, typename M>
auto as_span(M& m) {
  return std::span<S>(m.data(), static_cast<std::size_t>(m.size()));
}

template <typename S, typename Model>
auto collect_blocks(Model& m) {
  std::vector<std::span<S>> out;
  if (m.scheme.has_params()) {
    out.push_back(as_span<S>(m.mix.logits));
    out.push_back(std::span<S>(&m.mix.gamma, 1));
  }
  for (auto* dir : {&m.lstm1.forward, &m.lstm1.backward, &m.lstm2.forward, &m.lstm2.backward}) {
    out.push_back(as_span<S>(dir->w_input));
    out.push_back(as_span<S>(dir->w_recurrent));
    out.push_back(as_span<S>(dir->bias));
  }
  out.push_back(as_span<S>(m.projection.weight));
  out.push_back(as_span<S>(m.projection.bias));
  out.push_back(as_span<S>(m.transitions));
  out.push_back(as_span<S>(m.start));
  out.push_back(as_span<S>(m.end));
  return out;
}

template <typename S>
Matrix<S> masked(const Matrix<S>& x, const Matrix<S>& mask) {
  if (mask.size() == 0) return x;
  return (x.array() * mask.array()).matrix();
}

template <typename S>
struct ForwardPass {
  Matrix<S> mixed;
  BiLstmCache<S> lstm1;
  BiLstmCache<S> lstm2;
  Matrix<S> top;  // dropout-masked lstm2 output
  EmissionMatrix emissions;
};

template <typename S>
ForwardPass<S> run_forward(const TaggerModel<S>& model, const SentenceEmbedding& sentence,
                           const TaggerMasks<S>& masks) {
  if (static_cast<int>(sentence.num_layers) != model.num_layers ||
      static_cast<int>(sentence.dim) != model.dim) {
    throw ShapeError("sentence embedding shape does not match the model");
  }
  ForwardPass<S> f;
  f.mixed = mix_sentence(sentence, model.scheme, model.mix);
  f.lstm1 = bilstm_forward(masked(f.mixed, masks.input), model.lstm1, masks.recurrent1);
  f.lstm2 = bilstm_forward(masked(f.lstm1.output, masks.between), model.lstm2, masks.recurrent2);
  f.top = masked(f.lstm2.output, masks.output);
  f.emissions = linear_forward_seq(f.top, model.projection).transpose().template cast<double>();
  return f;
}

}  // namespace

template <typename S>
std::vector<std::span<S>> TaggerModel<S>::blocks() {
  return collect_blocks<S>(*this);
}

template <typename S>
std::vector<std::span<const S>> TaggerModel<S>::blocks() const {
  return collect_blocks<const S>(*this);
}

template <typename S>
void TaggerModel<S>::set_zero() {
  mix.logits.setZero();
  mix.gamma = S(0);
  for (auto& b : blocks()) std::fill(b.begin(), b.end(), S(0));
}

template <typename S>
CrfParams TaggerModel<S>::crf() const {
  return {transitions.template cast<double>(), start.template cast<double>(),
          end.template cast<double>()};
}

template <typename S>
TaggerMasks<S> sample_tagger_masks(const TaggerModel<S>& model, Eigen::Index length,
                                   const DropoutSpec& spec, Rng& rng) {
  spec.validate();
  TaggerMasks<S> m;
  if (spec.rate == 0.0) return m;
  const Eigen::Index h = model.hidden();
  m.input = sample_dropout_mask<S>(model.input_dim(), length, spec, rng);
  m.recurrent1.forward = sample_dropout_mask<S>(h, length, spec, rng);
  m.recurrent1.backward = sample_dropout_mask<S>(h, length, spec, rng);
  m.between = sample_dropout_mask<S>(2 * h, length, spec, rng);
  m.recurrent2.forward = sample_dropout_mask<S>(h, length, spec, rng);
  m.recurrent2.backward = sample_dropout_mask<S>(h, length, spec, rng);
  m.output = sample_dropout_mask<S>(2 * h, length, spec, rng);
  return m;
}

template <typename S>
double tagger_loss_and_grad(const TaggerModel<S>& model, const SentenceEmbedding& sentence,
                            std::span<const int> gold, const TaggerMasks<S>& masks,
                            TaggerModel<S>& grad) {
  const auto f = run_forward(model, sentence, masks);
  const auto crf = model.crf();
  const auto nll = nll_and_grad(f.emissions, crf, gold);

  grad.transitions += nll.grad.transitions.template cast<S>();
  grad.start += nll.grad.start.template cast<S>();
  grad.end += nll.grad.end.template cast<S>();

  const Matrix<S> d_emit = nll.grad_emissions.transpose().template cast<S>();
  Matrix<S> d_top = linear_backward_seq(f.top, model.projection, d_emit, grad.projection);
  Matrix<S> d_out2 = masked(d_top, masks.output);
  Matrix<S> d_in2 = bilstm_backward(f.lstm2, model.lstm2, d_out2, grad.lstm2);
  Matrix<S> d_out1 = masked(d_in2, masks.between);
  Matrix<S> d_in1 = bilstm_backward(f.lstm1, model.lstm1, d_out1, grad.lstm1);
  if (model.scheme.has_params()) {
    mix_sentence_backward(masked(d_in1, masks.input), sentence, model.scheme, model.mix, grad.mix);
  }
  return nll.loss;
}

template <typename S>
double tagger_loss(const TaggerModel<S>& model, const SentenceEmbedding& sentence,
                   std::span<const int> gold, const TaggerMasks<S>& masks) {
  const auto f = run_forward(model, sentence, masks);
  const auto crf = model.crf();
  return log_partition(f.emissions, crf) - score_sequence(f.emissions, crf, gold);
}

template <typename S>
EmissionMatrix tagger_emissions(const TaggerModel<S>& model, const SentenceEmbedding& sentence) {
  return run_forward(model, sentence, TaggerMasks<S>{}).emissions;
}

template <typename S>
std::vector<int> tagger_decode(const TaggerModel<S>& model, const SentenceEmbedding& sentence) {
  return viterbi_decode(tagger_emissions(model, sentence), model.crf()).tags;
}

#define LAYERMIX_INSTANTIATE(S)                                                                 \
  template struct TaggerModel<S>;                                                               \
  template TaggerMasks<S> sample_tagger_masks(const TaggerModel<S>&, Eigen::Index,              \
                                              const DropoutSpec&, Rng&);                        \
  template double tagger_loss_and_grad(const TaggerModel<S>&, const SentenceEmbedding&,         \
                                       std::span<const int>, const TaggerMasks<S>&,             \
                                       TaggerModel<S>&);                                        \
  template double tagger_loss(const TaggerModel<S>&, const SentenceEmbedding&,                  \
                              std::span<const int>, const TaggerMasks<S>&);                     \
  template EmissionMatrix tagger_emissions(const TaggerModel<S>&, const SentenceEmbedding&);    \
  template std::vector<int> tagger_decode(const TaggerModel<S>&, const SentenceEmbedding&);

LAYERMIX_INSTANTIATE(float)
LAYERMIX_INSTANTIATE(double)

#undef LAYERMIX_INSTANTIATE

}  // namespace layermix
