#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "semileak/core/config.hpp"
#include "semileak/core/image.hpp"
#include "semileak/core/membership.hpp"
#include "semileak/nn/network.hpp"

namespace semileak::models {

// Image classifier architecture.
//   wrn28:   wide residual network of depth 28 (3 groups of 4 blocks),
//            channel widths 16, 16w, 32w, 64w.
//   tinycnn: three stride-2 3x3 convolutions (b*w, 2b*w, 2b*w channels, b =
//            base_channels), each followed by batch normalization and a
//            rectifier, then global average pooling and a linear head.
//            Desk-scale default.
struct ClassifierSpec {
  ModelFamily family = ModelFamily::tinycnn;
  int widen_factor = 2;
  int class_count = 10;
  int base_channels = 8;
  int in_channels = 3;
  int image_side = 32;

  void validate() const;
  bool operator==(const ClassifierSpec&) const = default;
};

ClassifierSpec classifier_spec_from(const ExperimentConfig& config, int class_count);

void to_json(nlohmann::json& j, const ClassifierSpec& s);
void from_json(const nlohmann::json& j, ClassifierSpec& s);

template <typename T>
nn::Network<T> build_classifier(const ClassifierSpec& spec, std::uint64_t init_seed);

// Attack model: input_dim -> 64 -> 32 -> 2 with rectifiers in between.
struct AttackMLPSpec {
  int input_dim = 0;
  static constexpr int kHidden1 = 64;
  static constexpr int kHidden2 = 32;
  static constexpr int kOutputs = 2;
};

template <typename T>
nn::Network<T> build_attack_mlp(const AttackMLPSpec& spec, std::uint64_t init_seed);

// Packs same-shaped images into an NCHW batch.
template <typename T>
nn::Tensor<T> images_to_tensor(std::span<const Image> images);

// Softmax posteriors in batch order. Throws ContractError on shape mismatch.
std::vector<Posterior> predict_posteriors(const nn::Network<float>& model,
                                          std::span<const Image> images);

}  // namespace semileak::models
