#include "semileak/models/train_state.hpp"

#include <string>

#include "semileak/core/error.hpp"

namespace semileak::models {

const nn::NamedArray* TrainState::extra(const std::string& name) const {
  for (const auto& a : extras)
    if (a.name == name) return &a;
  return nullptr;
}

void TrainState::set_extra(nn::NamedArray array) {
  for (auto& a : extras)
    if (a.name == array.name) {
      a = std::move(array);
      return;
    }
  extras.push_back(std::move(array));
}

TrainState make_train_state(const ClassifierSpec& spec, std::int64_t total_steps,
                            std::uint64_t seed, double sgd_momentum, double weight_decay) {
  TrainState s;
  s.spec = spec;
  s.model = build_classifier<float>(spec, seed);
  s.ema = s.model;
  s.optimizer = nn::Sgd<float>(sgd_momentum, weight_decay);
  s.total_steps = total_steps;
  s.seed = seed;
  return s;
}

namespace {

nn::NamedArray to_array(const std::string& prefix, const nn::Param<float>& p) {
  nn::NamedArray a;
  a.name = prefix + p.name;
  a.shape.assign(p.shape.begin(), p.shape.end());
  a.values = p.value;
  return a;
}

void append_network(std::vector<nn::NamedArray>& out, const std::string& prefix,
                    const nn::Network<float>& net) {
  for (const auto* p : net.params()) out.push_back(to_array(prefix, *p));
  for (const auto* b : net.buffers()) out.push_back(to_array(prefix, *b));
}

void restore(nn::Param<float>& p, const nn::ArrayFile& file, const std::string& prefix) {
  const auto& a = file.at(prefix + p.name);
  if (a.values.size() != p.value.size())
    throw DataError("array '" + a.name + "' has " + std::to_string(a.values.size()) +
                    " values, expected " + std::to_string(p.value.size()));
  p.value = a.values;
}

void restore_network(nn::Network<float>& net, const nn::ArrayFile& file, const std::string& prefix) {
  for (auto* p : net.params()) restore(*p, file, prefix);
  for (auto* b : net.buffers()) restore(*b, file, prefix);
}

}  // namespace

void checkpoint_save(const TrainState& state, const std::filesystem::path& path) {
  nn::ArrayFile file;
  file.meta = {{"kind", "train_state"},
               {"spec", state.spec},
               {"step", state.step},
               {"total_steps", state.total_steps},
               {"seed", state.seed},
               {"sgd_momentum", state.optimizer.momentum()},
               {"weight_decay", state.optimizer.weight_decay()},
               {"has_velocity", !state.optimizer.velocity().empty()}};
  append_network(file.arrays, "model/", state.model);
  append_network(file.arrays, "ema/", state.ema);
  if (!state.optimizer.velocity().empty()) {
    const auto params = state.model.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      nn::NamedArray a;
      a.name = "velocity/" + params[i]->name;
      a.shape.assign(params[i]->shape.begin(), params[i]->shape.end());
      a.values = state.optimizer.velocity()[i];
      file.arrays.push_back(std::move(a));
    }
  }
  for (const auto& e : state.extras) {
    auto copy = e;
    copy.name = "extra/" + e.name;
    file.arrays.push_back(std::move(copy));
  }
  write_array_file(path, file);
}

TrainState checkpoint_load(const std::filesystem::path& path,
                           const std::optional<ClassifierSpec>& expected) {
  const auto file = nn::read_array_file(path);
  TrainState s;
  try {
    if (file.meta.at("kind") != "train_state")
      throw DataError(path.string() + " is not a training checkpoint");
    const auto spec = file.meta.at("spec").get<ClassifierSpec>();
    if (expected && !(*expected == spec))
      throw DataError("checkpoint " + path.string() + " was written for " +
                      nlohmann::json(spec).dump() + ", expected " +
                      nlohmann::json(*expected).dump());
    s = make_train_state(spec, file.meta.at("total_steps").get<std::int64_t>(),
                         file.meta.at("seed").get<std::uint64_t>(),
                         file.meta.at("sgd_momentum").get<double>(),
                         file.meta.at("weight_decay").get<double>());
    s.step = file.meta.at("step").get<std::int64_t>();
    restore_network(s.model, file, "model/");
    restore_network(s.ema, file, "ema/");
    if (file.meta.at("has_velocity").get<bool>()) {
      auto& vel = s.optimizer.velocity();
      const auto& params = s.model.params();
      vel.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& a = file.at("velocity/" + params[i]->name);
        if (a.values.size() != params[i]->value.size())
          throw DataError("velocity array size mismatch for " + params[i]->name);
        vel[i] = a.values;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint metadata malformed in " + path.string() + ": " + e.what());
  }
  const std::string prefix = "extra/";
  for (const auto& a : file.arrays)
    if (a.name.rfind(prefix, 0) == 0) {
      auto copy = a;
      copy.name = a.name.substr(prefix.size());
      s.extras.push_back(std::move(copy));
    }
  return s;
}

void save_network(const nn::Network<float>& net, const nlohmann::json& meta,
                  const std::filesystem::path& path) {
  nn::ArrayFile file;
  file.meta = meta;
  append_network(file.arrays, "", net);
  write_array_file(path, file);
}

nlohmann::json load_network(nn::Network<float>& net, const std::filesystem::path& path) {
  const auto file = nn::read_array_file(path);
  restore_network(net, file, "");
  return file.meta;
}

}  // namespace semileak::models
