#include "layermix/optim.hpp"

#include <cmath>
#include <string>

#include "layermix/errors.hpp"

namespace layermix {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
}

template <typename S>
void adam_step(std::span<const std::span<S>> params, std::span<const std::span<const S>> grads,
               AdamState<S>& state, const AdamConfig& config) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " parameter blocks but " +
                     std::to_string(grads.size()) + " gradient blocks");
  }
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), S(0));
      state.v.emplace_back(p.size(), S(0));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: block count changed");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || state.m[k].size() != params[k].size()) {
      throw ShapeError("adam: block " + std::to_string(k) + " size mismatch");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto g = grads[k];
    const auto p = params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      p[i] = static_cast<S>(static_cast<double>(p[i]) -
                            config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon));
    }
  }
}

template <typename S>
double clip_global_norm(std::span<const std::span<S>> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (S x : g) sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (const auto& g : grads) {
      for (S& x : g) x *= scale;
    }
  }
  return norm;
}

template void adam_step(std::span<const std::span<float>>, std::span<const std::span<const float>>,
                        AdamState<float>&, const AdamConfig&);
template void adam_step(std::span<const std::span<double>>,
                        std::span<const std::span<const double>>, AdamState<double>&,
                        const AdamConfig&);
template double clip_global_norm(std::span<const std::span<float>>, double);
template double clip_global_norm(std::span<const std::span<double>>, double);

}  // namespace layermix
