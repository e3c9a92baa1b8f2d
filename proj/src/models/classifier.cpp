#include "semileak/models/classifier.hpp"

#include <string>

#include "semileak/core/error.hpp"
#include "semileak/core/rng.hpp"
#include "semileak/nn/loss.hpp"

namespace semileak::models {

void ClassifierSpec::validate() const {
  if (class_count < 2) throw ContractError("classifier needs at least 2 classes");
  if (widen_factor != 1 && widen_factor != 2 && widen_factor != 4 && widen_factor != 8)
    throw ContractError("widen factor must be one of 1, 2, 4, 8");
  if (base_channels < 1 || in_channels < 1 || image_side < 8)
    throw ContractError("classifier input/width parameters out of range");
}

ClassifierSpec classifier_spec_from(const ExperimentConfig& config, int class_count) {
  ClassifierSpec s;
  s.family = config.family;
  s.widen_factor = config.widen_factor;
  s.class_count = class_count;
  s.base_channels = config.base_channels;
  return s;
}

void to_json(nlohmann::json& j, const ClassifierSpec& s) {
  j = nlohmann::json{{"family", to_string(s.family)},     {"widen_factor", s.widen_factor},
                     {"class_count", s.class_count},       {"base_channels", s.base_channels},
                     {"in_channels", s.in_channels},       {"image_side", s.image_side}};
}

void from_json(const nlohmann::json& j, ClassifierSpec& s) {
  s.family = model_family_from_string(j.at("family").get<std::string>());
  j.at("widen_factor").get_to(s.widen_factor);
  j.at("class_count").get_to(s.class_count);
  j.at("base_channels").get_to(s.base_channels);
  j.at("in_channels").get_to(s.in_channels);
  j.at("image_side").get_to(s.image_side);
}

namespace {

template <typename T>
nn::Sequential<T> tinycnn(const ClassifierSpec& s, Rng& rng) {
  const int c1 = s.base_channels * s.widen_factor;
  const int c2 = 2 * c1;
  nn::Sequential<T> net;
  auto conv = [&](const char* name, int in, int out, int stride = 2) {
    auto layer = std::make_unique<nn::Conv2d<T>>(name, in, out, 3, stride, 1, true);
    layer->init(rng);
    if (in == s.in_channels && net.size() == 0) layer->set_input_grad(false);
    net.add(std::move(layer));
    net.add(std::make_unique<nn::BatchNorm2d<T>>(std::string(name) + ".bn", out, T(0.01), T(0.001)));
    net.add(std::make_unique<nn::LeakyRelu<T>>(T(0)));
  };
  conv("conv1", s.in_channels, c1);
  conv("conv2", c1, c2);
  conv("conv3", c2, c2);
  net.add(std::make_unique<nn::GlobalAvgPool<T>>());
  auto head = std::make_unique<nn::Linear<T>>("fc", c2, s.class_count);
  head->init(rng);
  net.add(std::move(head));
  return net;
}

template <typename T>
nn::Sequential<T> wrn28(const ClassifierSpec& s, Rng& rng) {
  constexpr int kBlocksPerGroup = 4;  // (28 - 4) / 6
  const T slope = T(0.1);
  const int w = s.widen_factor;
  const int widths[4] = {16, 16 * w, 32 * w, 64 * w};
  nn::Sequential<T> net;
  auto stem = std::make_unique<nn::Conv2d<T>>("stem", s.in_channels, widths[0], 3, 1, 1, false);
  stem->init(rng, 2.0 / (1.0 + 0.01));
  stem->set_input_grad(false);
  net.add(std::move(stem));
  for (int g = 0; g < 3; ++g) {
    for (int b = 0; b < kBlocksPerGroup; ++b) {
      const int in = b == 0 ? widths[g] : widths[g + 1];
      const int stride = (b == 0 && g > 0) ? 2 : 1;
      net.add(std::make_unique<nn::WideBasicBlock<T>>(
          "group" + std::to_string(g + 1) + ".block" + std::to_string(b + 1), in, widths[g + 1],
          stride, slope, rng));
    }
  }
  net.add(std::make_unique<nn::BatchNorm2d<T>>("final_bn", widths[3]));
  net.add(std::make_unique<nn::LeakyRelu<T>>(slope));
  net.add(std::make_unique<nn::GlobalAvgPool<T>>());
  auto head = std::make_unique<nn::Linear<T>>("fc", widths[3], s.class_count);
  head->init(rng);
  net.add(std::move(head));
  return net;
}

}  // namespace

template <typename T>
nn::Network<T> build_classifier(const ClassifierSpec& spec, std::uint64_t init_seed) {
  spec.validate();
  Rng rng = Rng::derive(init_seed, "classifier-init");
  if (spec.family == ModelFamily::wrn28) return nn::Network<T>(wrn28<T>(spec, rng));
  return nn::Network<T>(tinycnn<T>(spec, rng));
}

template <typename T>
nn::Network<T> build_attack_mlp(const AttackMLPSpec& spec, std::uint64_t init_seed) {
  if (spec.input_dim < 1) throw ContractError("attack MLP input dimension must be >= 1");
  Rng rng = Rng::derive(init_seed, "attack-mlp-init");
  nn::Sequential<T> net;
  const int widths[4] = {spec.input_dim, AttackMLPSpec::kHidden1, AttackMLPSpec::kHidden2,
                         AttackMLPSpec::kOutputs};
  for (int i = 0; i < 3; ++i) {
    auto fc = std::make_unique<nn::Linear<T>>("fc" + std::to_string(i + 1), widths[i], widths[i + 1]);
    fc->init(rng);
    net.add(std::move(fc));
    if (i < 2) net.add(std::make_unique<nn::LeakyRelu<T>>(T(0)));
  }
  return nn::Network<T>(std::move(net));
}

template <typename T>
nn::Tensor<T> images_to_tensor(std::span<const Image> images) {
  if (images.empty()) return {};
  const Image& first = images.front();
  nn::Tensor<T> t(static_cast<int>(images.size()), first.channels, first.height, first.width);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(first)) throw ContractError("images in a batch differ in shape");
    std::copy(images[i].data.begin(), images[i].data.end(),
              t.data.begin() + static_cast<std::ptrdiff_t>(i * t.sample_size()));
  }
  return t;
}

std::vector<Posterior> predict_posteriors(const nn::Network<float>& model,
                                          std::span<const Image> images) {
  constexpr std::size_t kChunk = 256;
  std::vector<Posterior> out;
  out.reserve(images.size());
  for (std::size_t begin = 0; begin < images.size(); begin += kChunk) {
    const auto chunk = images.subspan(begin, std::min(kChunk, images.size() - begin));
    auto rows = nn::softmax_rows(model.infer(images_to_tensor<float>(chunk)));
    for (auto& r : rows) out.push_back(std::move(r));
  }
  return out;
}

template nn::Network<float> build_classifier(const ClassifierSpec&, std::uint64_t);
template nn::Network<double> build_classifier(const ClassifierSpec&, std::uint64_t);
template nn::Network<float> build_attack_mlp(const AttackMLPSpec&, std::uint64_t);
template nn::Network<double> build_attack_mlp(const AttackMLPSpec&, std::uint64_t);
template nn::Tensor<float> images_to_tensor(std::span<const Image>);
template nn::Tensor<double> images_to_tensor(std::span<const Image>);

}  // namespace semileak::models
