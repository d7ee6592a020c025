#ifndef LUNARDOP_CONFIG_HPP
#define LUNARDOP_CONFIG_HPP

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lunardop/montecarlo.hpp"

namespace lunardop {

/// Invalid scenario document: unknown key, wrong type or out-of-range value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  Scenario scenario;
  std::string output_dir = "out";
};

/// Parses a JSON scenario. Every key is optional; unknown keys are errors.
/// Angles are in degrees, distances in km.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of every field that influences results (threads excluded).
std::string scenario_to_json(const Scenario& scenario);

/// FNV-1a of scenario_to_json.
std::string scenario_hash(const Scenario& scenario);

}  // namespace lunardop

#endif  // LUNARDOP_CONFIG_HPP
