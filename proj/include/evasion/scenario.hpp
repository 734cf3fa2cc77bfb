#pragma once

#include <stdexcept>
#include <string>

#include "evasion/simulation.hpp"

namespace evasion::io {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scenario files are line-based `key = value` pairs under `[section]`
/// headers, `#` comments. Dimensioned values carry an explicit unit suffix
/// (e.g. `speed = 80 kmh`); unknown keys, wrong units and out-of-range values
/// are rejected with line/column positions.
sim::Scenario parse_scenario_text(const std::string& text,
                                  const std::string& origin = "<string>");
sim::Scenario parse_scenario_file(const std::string& file);

/// `section.key=value` override, same value grammar as the file body.
void apply_override(sim::Scenario& sc, const std::string& dotted, const std::string& value);

/// Canonical emission (SI units, full precision); parse(emit(s)) == s.
std::string emit_scenario(const sim::Scenario& sc);

}  // namespace evasion::io
