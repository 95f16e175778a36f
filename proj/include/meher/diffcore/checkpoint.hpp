#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "meher/diffcore/adam.hpp"
#include "meher/diffcore/mlp.hpp"
#include "meher/diffcore/tensor.hpp"

namespace meher::diff {

// Versioned JSON blob of named flat arrays plus shapes:
//   {"format": "meher.tensors", "version": 1,
//    "tensors": [{"name": ..., "shape": [...], "data": [...]}, ...]}
// Doubles are written in shortest round-trip form, so load(save(x)) == x
// bit for bit.
inline constexpr int kTensorBlobVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

nlohmann::json tensors_to_json(const NamedTensors& tensors);
NamedTensors tensors_from_json(const nlohmann::json& blob);

nlohmann::json mlp_to_json(const MlpParams& params);
MlpParams mlp_from_json(const nlohmann::json& blob);

nlohmann::json adam_to_json(const AdamState& state);
AdamState adam_from_json(const nlohmann::json& blob);

}  // namespace meher::diff
