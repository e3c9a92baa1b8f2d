#include "semileak/defenses/dpsgd.hpp"

#include <cmath>
#include <string>

#include "semileak/core/error.hpp"

namespace semileak::defenses {

void DpSgdOptions::validate() const {
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be >= 0");
}

std::vector<double> dpsgd_update(const std::vector<std::vector<double>>& per_sample_grads,
                                 double clip_norm, double noise_scale, Rng& rng) {
  if (per_sample_grads.empty()) throw ContractError("dpsgd_update needs a nonempty batch");
  if (!(clip_norm > 0.0) || !(noise_scale >= 0.0))
    throw ContractError("dpsgd_update needs clip_norm > 0 and noise_scale >= 0");
  const std::size_t dim = per_sample_grads.front().size();
  const double batch = static_cast<double>(per_sample_grads.size());
  std::vector<double> sum(dim, 0.0);
  for (const auto& g : per_sample_grads) {
    if (g.size() != dim) throw ContractError("per-sample gradients differ in length");
    double sq = 0.0;
    for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    const double factor = norm > clip_norm ? clip_norm / norm : 1.0;
    for (std::size_t i = 0; i < dim; ++i) sum[i] += g[i] * factor;
  }
  if (noise_scale > 0.0 && !std::isfinite(clip_norm))
    throw ContractError("noise needs a finite clip_norm");
  const double sigma = noise_scale > 0.0 ? noise_scale * clip_norm / batch : 0.0;
  for (auto& v : sum) {
    v /= batch;
    if (sigma > 0.0) v += sigma * rng.normal();
  }
  return sum;
}

}  // namespace semileak::defenses
