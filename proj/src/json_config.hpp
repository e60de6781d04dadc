#pragma once

// JSON mapping of configuration structs. Private to the library: shared by
// checkpoint headers and run manifests. Readers reject unknown keys.

#include <json.hpp>
#include <set>
#include <string>

#include "cnre/config.hpp"

namespace cnre::detail {

using nlohmann::json;

/// Throws ParseError naming the first key of `obj` not in `allowed`.
void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where);

json to_json(const Ablation& a);
Ablation ablation_from_json(const json& j);

json to_json(const ModelConfig& m);
/// Fields absent from `j` keep the values already in `base`.
ModelConfig model_config_from_json(const json& j, ModelConfig base = {});

json to_json(const TrainConfig& t);
TrainConfig train_config_from_json(const json& j, TrainConfig base = {});

}  // namespace cnre::detail
