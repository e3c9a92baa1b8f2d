#pragma once

#include <cstdint>

namespace semileak::models {

// eta * cos(pi * k / (2 N)) for 0 <= k <= N. Throws ContractError otherwise.
double cosine_lr(std::int64_t k, std::int64_t total_steps, double eta);

}  // namespace semileak::models
