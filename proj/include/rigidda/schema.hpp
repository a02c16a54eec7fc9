// Validation against the subset of JSON Schema used by the published config,
// phantom and report schemas: type, properties, required,
// additionalProperties, items, minItems, maxItems, enum, const, anyOf, minimum,
// maximum, exclusiveMinimum, exclusiveMaximum, $defs / $ref ("#/$defs/...").
#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace rigidda {

// Every violation as "<json pointer>: <message>"; empty when valid.
std::vector<std::string> schema_errors(const nlohmann::json& instance,
                                       const nlohmann::json& schema);

// Throws std::invalid_argument listing the violations.
void validate_against_schema(const nlohmann::json& instance, const nlohmann::json& schema,
                             const std::string& what);

}  // namespace rigidda
