#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace layermix {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clipping threshold; 0 disables clipping.
  double clip_norm = 0.0;

  void validate() const;
};

template <typename S>
struct AdamState {
  std::vector<std::vector<S>> m;
  std::vector<std::vector<S>> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update over a list of parameter blocks. The state
// is sized on first use; afterwards block shapes must not change.
template <typename S>
void adam_step(std::span<const std::span<S>> params, std::span<const std::span<const S>> grads,
               AdamState<S>& state, const AdamConfig& config);

// Scales all gradient blocks so their joint L2 norm is at most max_norm.
// Returns the norm before scaling.
template <typename S>
double clip_global_norm(std::span<const std::span<S>> grads, double max_norm);

}  // namespace layermix
