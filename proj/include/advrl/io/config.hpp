#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "advrl/harness/experiment.hpp"

namespace advrl {

/// Everything a CLI invocation needs: one sweep plan (whose base plan drives the
/// single-run subcommands) and where outputs go.
struct Config {
  SweepPlan sweep;
  std::string output_dir = "out";
};

struct ParsedConfig {
  Config config;
  std::vector<std::string> notices;  // keys that fell back to defaults
};

/// Parses the nested JSON config. Unknown keys and ill-typed values throw
/// ConfigError; absent keys take their defaults and are reported in `notices`.
ParsedConfig parse_config(const nlohmann::json& doc);
ParsedConfig parse_config_text(std::string_view text);
ParsedConfig load_config(const std::string& path);

/// Complete document with every key present; parse_config(to_json(c)) == c.
nlohmann::json to_json(const Config& c);

/// Applies a dotted override such as "agent.learning_rate=0.1". The value is
/// read as JSON when it parses, otherwise as a string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

}  // namespace advrl
