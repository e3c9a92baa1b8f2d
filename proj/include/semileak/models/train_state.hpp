#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "semileak/models/classifier.hpp"
#include "semileak/nn/array_file.hpp"
#include "semileak/nn/optim.hpp"

namespace semileak::models {

// Everything needed to resume training bit-exactly. Every random draw of a
// training step is derived from (seed, step, sample), so the seed is the
// whole random state.
struct TrainState {
  ClassifierSpec spec;
  nn::Network<float> model;
  nn::Network<float> ema;  // queried for inference and by every attack
  nn::Sgd<float> optimizer;
  std::int64_t step = 0;
  std::int64_t total_steps = 0;
  std::uint64_t seed = 0;
  // Method-specific state persisted with the checkpoint (e.g. the FlexMatch
  // pseudo-label table).
  std::vector<nn::NamedArray> extras;

  const nn::NamedArray* extra(const std::string& name) const;
  void set_extra(nn::NamedArray array);
};

TrainState make_train_state(const ClassifierSpec& spec, std::int64_t total_steps,
                            std::uint64_t seed, double sgd_momentum, double weight_decay);

void checkpoint_save(const TrainState& state, const std::filesystem::path& path);

// With `expected`, a spec mismatch (e.g. a different class count) raises
// DataError.
TrainState checkpoint_load(const std::filesystem::path& path,
                           const std::optional<ClassifierSpec>& expected = std::nullopt);

// Saves a bare network (used for attack models).
void save_network(const nn::Network<float>& net, const nlohmann::json& meta,
                  const std::filesystem::path& path);
// Loads values into `net`, which must have the stored layout. Returns meta.
nlohmann::json load_network(nn::Network<float>& net, const std::filesystem::path& path);

}  // namespace semileak::models
