#include "layermix/mixer.hpp"

#include <algorithm>
#include <charconv>

#include "layermix/errors.hpp"

namespace layermix {

MixScheme MixScheme::individual(int layer) { return MixScheme(Kind::kIndividual, layer, {}); }
MixScheme MixScheme::concat() { return MixScheme(Kind::kConcat, -1, {}); }
MixScheme MixScheme::fixed_average() { return MixScheme(Kind::kFixedAverage, -1, {}); }

MixScheme MixScheme::learned_weighted(std::vector<int> active) {
  if (active.empty()) throw ConfigError("wavg needs at least one layer");
  auto sorted = active;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("wavg layer list contains duplicates");
  }
  return MixScheme(Kind::kLearnedWeighted, -1, std::move(active));
}

namespace {

int parse_layer_index(std::string_view text, std::string_view whole) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end || value < 0) {
    throw ConfigError("bad layer index '" + std::string(text) + "' in scheme '" +
                      std::string(whole) + "'");
  }
  return value;
}

}  // namespace

MixScheme MixScheme::parse(std::string_view text) {
  if (text == "concat") return concat();
  if (text == "avg") return fixed_average();
  if (text.starts_with("layer:")) {
    return individual(parse_layer_index(text.substr(6), text));
  }
  if (text.starts_with("wavg:")) {
    std::vector<int> active;
    std::string_view rest = text.substr(5);
    while (true) {
      const auto comma = rest.find(',');
      active.push_back(parse_layer_index(rest.substr(0, comma), text));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return learned_weighted(std::move(active));
  }
  throw ConfigError("unknown scheme '" + std::string(text) +
                    "' (expected layer:<l>, concat, avg or wavg:<l,...>)");
}

void MixScheme::validate(int num_layers) const {
  auto check = [&](int l) {
    if (l < 0 || l >= num_layers) {
      throw ConfigError("scheme '" + to_string() + "': layer index " + std::to_string(l) +
                        " out of range for " + std::to_string(num_layers) + " layers");
    }
  };
  if (kind_ == Kind::kIndividual) check(layer_);
  for (int l : active_) check(l);
}

std::string MixScheme::to_string() const {
  switch (kind_) {
    case Kind::kIndividual:
      return "layer:" + std::to_string(layer_);
    case Kind::kConcat:
      return "concat";
    case Kind::kFixedAverage:
      return "avg";
    case Kind::kLearnedWeighted: {
      std::string s = "wavg:";
      for (std::size_t i = 0; i < active_.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(active_[i]);
      }
      return s;
    }
  }
  return {};
}

template <typename S>
MixParams<S> MixParams<S>::initial(const MixScheme& scheme) {
  MixParams p;
  p.logits = Vector<S>::Zero(static_cast<Eigen::Index>(scheme.active().size()));
  p.gamma = S(1);
  return p;
}

template <typename S>
Vector<S> softmax(const Vector<S>& logits) {
  if (logits.size() == 0) return logits;
  const S max = logits.maxCoeff();
  Vector<S> e = (logits.array() - max).exp().matrix();
  return e / e.sum();
}

int output_dim(const MixScheme& scheme, int num_layers, int dim) {
  return scheme.kind() == MixScheme::Kind::kConcat ? num_layers * dim : dim;
}

namespace {

template <typename S>
void check_params(const MixScheme& scheme, const MixParams<S>& params) {
  if (scheme.has_params() &&
      params.logits.size() != static_cast<Eigen::Index>(scheme.active().size())) {
    throw ShapeError("mixer has " + std::to_string(params.logits.size()) + " logits for " +
                     std::to_string(scheme.active().size()) + " active layers");
  }
}

template <typename S>
void check_layers(const Matrix<S>& layers, const MixScheme& scheme) {
  const auto L = static_cast<int>(layers.rows());
  if (L == 0 || layers.cols() == 0) throw ShapeError("empty layer matrix");
  try {
    scheme.validate(L);
  } catch (const ConfigError& e) {
    throw ShapeError(e.what());
  }
}

}  // namespace

template <typename S>
Vector<S> mix_forward(const Matrix<S>& layers, const MixScheme& scheme,
                      const MixParams<S>& params) {
  check_layers(layers, scheme);
  const auto L = layers.rows();
  const auto D = layers.cols();
  switch (scheme.kind()) {
    case MixScheme::Kind::kIndividual:
      return layers.row(scheme.layer()).transpose();
    case MixScheme::Kind::kConcat: {
      Vector<S> out(L * D);
      for (Eigen::Index j = 0; j < L; ++j) out.segment(j * D, D) = layers.row(j).transpose();
      return out;
    }
    case MixScheme::Kind::kFixedAverage:
      return layers.colwise().sum().transpose() / S(L);
    case MixScheme::Kind::kLearnedWeighted: {
      check_params(scheme, params);
      const Vector<S> s = softmax(params.logits);
      Vector<S> out = Vector<S>::Zero(D);
      for (std::size_t k = 0; k < scheme.active().size(); ++k) {
        out += s[k] * layers.row(scheme.active()[k]).transpose();
      }
      return params.gamma * out;
    }
  }
  return {};
}

template <typename S>
MixGrad<S> mix_backward(const Vector<S>& grad_out, const Matrix<S>& layers,
                        const MixScheme& scheme, const MixParams<S>& params) {
  check_layers(layers, scheme);
  const auto L = layers.rows();
  const auto D = layers.cols();
  if (grad_out.size() != output_dim(scheme, static_cast<int>(L), static_cast<int>(D))) {
    throw ShapeError("mixer output gradient has wrong length");
  }
  MixGrad<S> g;
  g.layers = Matrix<S>::Zero(L, D);
  g.logits = Vector<S>::Zero(static_cast<Eigen::Index>(scheme.active().size()));
  switch (scheme.kind()) {
    case MixScheme::Kind::kIndividual:
      g.layers.row(scheme.layer()) = grad_out.transpose();
      break;
    case MixScheme::Kind::kConcat:
      for (Eigen::Index j = 0; j < L; ++j) g.layers.row(j) = grad_out.segment(j * D, D).transpose();
      break;
    case MixScheme::Kind::kFixedAverage:
      g.layers.rowwise() = grad_out.transpose() / S(L);
      break;
    case MixScheme::Kind::kLearnedWeighted: {
      check_params(scheme, params);
      const Vector<S> s = softmax(params.logits);
      const auto K = static_cast<Eigen::Index>(scheme.active().size());
      // d(out)/d(s_k) contracted with grad_out, before the gamma factor.
      Vector<S> proj(K);
      for (Eigen::Index k = 0; k < K; ++k) {
        const int j = scheme.active()[k];
        proj[k] = grad_out.dot(layers.row(j).transpose());
        g.layers.row(j) = (params.gamma * s[k]) * grad_out.transpose();
      }
      g.gamma = s.dot(proj);
      const Vector<S> grad_s = params.gamma * proj;
      g.logits = (s.array() * (grad_s.array() - s.dot(grad_s))).matrix();
      break;
    }
  }
  return g;
}

template <typename S>
PenaltyResult<S> logit_penalty(const MixParams<S>& params, S lambda) {
  if (!(lambda >= S(0))) throw ConfigError("logit penalty must be non-negative");
  PenaltyResult<S> r;
  r.loss = lambda * params.logits.squaredNorm();
  r.grad = S(2) * lambda * params.logits;
  return r;
}

template <typename S>
Matrix<S> token_layers(const SentenceEmbedding& sentence, std::size_t token) {
  const auto L = static_cast<Eigen::Index>(sentence.num_layers);
  const auto D = static_cast<Eigen::Index>(sentence.dim);
  Matrix<S> H(L, D);
  for (Eigen::Index j = 0; j < L; ++j) {
    const auto v = sentence.vec(static_cast<std::size_t>(j), token);
    for (Eigen::Index d = 0; d < D; ++d) H(j, d) = static_cast<S>(v[d]);
  }
  return H;
}

template <typename S>
Matrix<S> mix_sentence(const SentenceEmbedding& sentence, const MixScheme& scheme,
                       const MixParams<S>& params) {
  const int out_dim = output_dim(scheme, static_cast<int>(sentence.num_layers),
                                 static_cast<int>(sentence.dim));
  const auto n = static_cast<Eigen::Index>(sentence.size());
  Matrix<S> out(out_dim, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    out.col(t) = mix_forward(token_layers<S>(sentence, static_cast<std::size_t>(t)), scheme, params);
  }
  return out;
}

template <typename S>
void mix_sentence_backward(const Matrix<S>& grad_out, const SentenceEmbedding& sentence,
                           const MixScheme& scheme, const MixParams<S>& params,
                           MixParams<S>& grad) {
  if (!scheme.has_params()) return;
  if (grad_out.cols() != static_cast<Eigen::Index>(sentence.size())) {
    throw ShapeError("mixer output gradient has wrong sequence length");
  }
  for (Eigen::Index t = 0; t < grad_out.cols(); ++t) {
    const auto g = mix_backward<S>(grad_out.col(t), token_layers<S>(sentence, static_cast<std::size_t>(t)),
                                   scheme, params);
    grad.logits += g.logits;
    grad.gamma += g.gamma;
  }
}

#define LAYERMIX_INSTANTIATE(S)                                                                  \
  template struct MixParams<S>;                                                                  \
  template Vector<S> softmax(const Vector<S>&);                                                  \
  template Vector<S> mix_forward(const Matrix<S>&, const MixScheme&, const MixParams<S>&);       \
  template MixGrad<S> mix_backward(const Vector<S>&, const Matrix<S>&, const MixScheme&,         \
                                   const MixParams<S>&);                                         \
  template PenaltyResult<S> logit_penalty(const MixParams<S>&, S);                               \
  template Matrix<S> token_layers(const SentenceEmbedding&, std::size_t);                        \
  template Matrix<S> mix_sentence(const SentenceEmbedding&, const MixScheme&, const MixParams<S>&); \
  template void mix_sentence_backward(const Matrix<S>&, const SentenceEmbedding&, const MixScheme&, \
                                      const MixParams<S>&, MixParams<S>&);

LAYERMIX_INSTANTIATE(float)
LAYERMIX_INSTANTIATE(double)

#undef LAYERMIX_INSTANTIATE

}  // namespace layermix
