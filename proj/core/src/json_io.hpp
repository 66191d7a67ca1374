#pragma once

// Internal JSON conversions shared by the serializers. Not installed.

#include <map>
#include <string>
#include <string_view>

#include "coverify/executor.hpp"
#include "json.hpp"

namespace coverify::json_io {

using nlohmann::json;
using nlohmann::ordered_json;

/// Parses one JSON document, rethrowing nlohmann errors as ParseError.
ordered_json parse(std::string_view text, std::size_t line = 0);

ordered_json to_json(const ExecutionResult& result);
ExecutionResult execution_from_json(const ordered_json& doc, std::size_t line = 0);
ordered_json to_json(const HarnessOutcome& outcome);
HarnessOutcome outcome_from_json(const ordered_json& doc, std::size_t line = 0);

/// {"<digest>": {"compile": ..., "run": ...}, ...}
ordered_json outcomes_to_json(const std::map<std::string, HarnessOutcome>& outcomes);
std::map<std::string, HarnessOutcome> outcomes_from_json(const ordered_json& doc);

}  // namespace coverify::json_io
