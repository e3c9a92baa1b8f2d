#pragma once

#include <vector>

#include "semileak/core/rng.hpp"

namespace semileak::defenses {

struct DpSgdOptions {
  double clip_norm = 1.0;
  double noise_scale = 1e-5;  // noise multiplier

  // Throws ConfigError unless clip_norm > 0 and noise_scale >= 0.
  void validate() const;
};

// Clipped, noised mean of per-sample gradients: every gradient is rescaled
// to L2 norm at most clip_norm, the rescaled gradients are averaged, and
// Gaussian noise with standard deviation noise_scale * clip_norm / batch is
// added to each coordinate. clip_norm may be +infinity (no clipping).
// Throws ContractError on an empty batch or ragged gradients.
std::vector<double> dpsgd_update(const std::vector<std::vector<double>>& per_sample_grads,
                                 double clip_norm, double noise_scale, Rng& rng);

}  // namespace semileak::defenses
