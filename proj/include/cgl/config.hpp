#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cgl/protocol.hpp"
#include "cgl/synthgui.hpp"

namespace cgl {

// JSON config files. Every key is optional (defaults apply) but unknown keys
// and a wrong "schema" tag are InputErrors.
inline constexpr std::string_view kSuiteConfigSchema = "cgl-suite-config/1";
inline constexpr std::string_view kRunConfigSchema = "cgl-run-config/1";

SuiteConfig suite_config_from_json(std::string_view text);
std::string suite_config_to_json(const SuiteConfig& config);

RunConfig run_config_from_json(std::string_view text);
std::string run_config_to_json(const RunConfig& config);

SuiteConfig load_suite_config(const std::filesystem::path& path);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace cgl
