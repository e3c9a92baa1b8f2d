#include "semileak/models/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "semileak/core/error.hpp"

namespace semileak::models {

double cosine_lr(std::int64_t k, std::int64_t total_steps, double eta) {
  if (total_steps < 1 || k < 0 || k > total_steps)
    throw ContractError("cosine_lr: step " + std::to_string(k) + " outside [0, " +
                        std::to_string(total_steps) + "]");
  if (!(eta > 0.0)) throw ContractError("cosine_lr: base rate must be positive");
  if (k == total_steps) return 0.0;
  return eta * std::cos(std::numbers::pi * static_cast<double>(k) /
                        (2.0 * static_cast<double>(total_steps)));
}

}  // namespace semileak::models
