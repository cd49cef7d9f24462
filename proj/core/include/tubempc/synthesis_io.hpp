#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "tubempc/synthesis.hpp"

namespace tubempc {

nlohmann::json support_set_to_json(const SupportSet& S);
SupportSet support_set_from_json(const nlohmann::json& j);

nlohmann::json mixed_to_json(const MixedConstraints& M);
MixedConstraints mixed_from_json(const nlohmann::json& j);

nlohmann::json synthesis_to_json(const TubeSynthesis& s);
TubeSynthesis synthesis_from_json(const nlohmann::json& j);

void save_synthesis(const TubeSynthesis& s, const std::string& path);
TubeSynthesis load_synthesis(const std::string& path);

}  // namespace tubempc
