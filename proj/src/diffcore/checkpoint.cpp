#include "meher/diffcore/checkpoint.hpp"

#include "meher/errors.hpp"

namespace meher::diff {

using nlohmann::json;

json tensors_to_json(const NamedTensors& tensors) {
  json list = json::array();
  for (const auto& [name, t] : tensors) {
    if (!t.all_finite()) throw NumericalError("refusing to serialize non-finite tensor " + name);
    list.push_back({{"name", name},
                    {"shape", t.shape()},
                    {"data", std::vector<double>(t.data().begin(), t.data().end())}});
  }
  return {{"format", "meher.tensors"}, {"version", kTensorBlobVersion}, {"tensors", list}};
}

NamedTensors tensors_from_json(const json& blob) {
  if (blob.value("format", "") != "meher.tensors") throw ConfigError("not a meher.tensors blob");
  if (blob.at("version").get<int>() != kTensorBlobVersion) {
    throw ConfigError("unsupported tensor blob version " + blob.at("version").dump());
  }
  NamedTensors out;
  for (const auto& entry : blob.at("tensors")) {
    out.emplace_back(entry.at("name").get<std::string>(),
                     Tensor(entry.at("shape").get<std::vector<std::size_t>>(),
                            entry.at("data").get<std::vector<double>>()));
  }
  return out;
}

json mlp_to_json(const MlpParams& params) {
  NamedTensors named;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    named.emplace_back("layer" + std::to_string(i) + ".weight", params.layers[i].weight);
    named.emplace_back("layer" + std::to_string(i) + ".bias", params.layers[i].bias);
  }
  json blob = tensors_to_json(named);
  blob["activation"] = params.hidden_activation == Activation::kTanh ? "tanh" : "identity";
  return blob;
}

MlpParams mlp_from_json(const json& blob) {
  NamedTensors named = tensors_from_json(blob);
  if (named.size() % 2 != 0) throw ConfigError("MLP blob must hold weight/bias pairs");
  MlpParams params;
  params.hidden_activation =
      blob.value("activation", "tanh") == "identity" ? Activation::kIdentity : Activation::kTanh;
  for (std::size_t i = 0; i < named.size(); i += 2) {
    params.layers.push_back({std::move(named[i].second), std::move(named[i + 1].second)});
  }
  params.validate();
  return params;
}

json adam_to_json(const AdamState& state) {
  NamedTensors m, v;
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    m.emplace_back("m" + std::to_string(i), state.first_moment[i]);
    v.emplace_back("v" + std::to_string(i), state.second_moment[i]);
  }
  return {{"step_size", state.config.step_size},
          {"beta1", state.config.beta1},
          {"beta2", state.config.beta2},
          {"epsilon", state.config.epsilon},
          {"step", state.step},
          {"first_moment", tensors_to_json(m)},
          {"second_moment", tensors_to_json(v)}};
}

AdamState adam_from_json(const json& blob) {
  AdamState state;
  state.config.step_size = blob.at("step_size").get<double>();
  state.config.beta1 = blob.at("beta1").get<double>();
  state.config.beta2 = blob.at("beta2").get<double>();
  state.config.epsilon = blob.at("epsilon").get<double>();
  state.step = blob.at("step").get<std::uint64_t>();
  for (auto& [name, t] : tensors_from_json(blob.at("first_moment"))) state.first_moment.push_back(std::move(t));
  for (auto& [name, t] : tensors_from_json(blob.at("second_moment"))) state.second_moment.push_back(std::move(t));
  if (state.first_moment.size() != state.second_moment.size()) {
    throw ConfigError("Adam blob moment counts differ");
  }
  return state;
}

}  // namespace meher::diff
