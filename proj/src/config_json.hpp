#pragma once

#include <json.hpp>

#include "dyadlab/config.hpp"

namespace dyadlab {

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_as_json(const RunConfig& cfg);

}  // namespace dyadlab
