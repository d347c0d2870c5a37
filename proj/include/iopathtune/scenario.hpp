#pragma once

// Scenario files.
//
// A scenario is a JSON document. Unknown keys are errors; every error names
// the offending key as a dotted path (for example
// `clients[0].schedule[1].workload.request_size`). Omitted optional keys take
// the documented defaults. See scenarios/README.md for the schema.

#include <filesystem>
#include <string>
#include <string_view>

#include "iopathtune/sim.hpp"

namespace iopathtune {

/// Parses scenario text. Throws ConfigError.
Scenario parse_scenario(std::string_view json_text);

/// Reads and parses a scenario file. Throws ConfigError for bad content and
/// std::system_error when the file cannot be read.
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical JSON form (every key written, two-space indent).
std::string scenario_to_json(const Scenario& scenario);

}  // namespace iopathtune
