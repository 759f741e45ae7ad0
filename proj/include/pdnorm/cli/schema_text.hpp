#pragma once

// Copy of docs/problem_spec.schema.json; a test keeps the two identical.

namespace pdnorm::cli
{

inline constexpr const char *problem_spec_schema_text = R"pdnorm_schema({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "pdnorm problem specification",
  "type": "object",
  "required": ["kind", "n", "eigenvalues", "terms"],
  "additionalProperties": false,
  "properties": {
    "kind": {"type": "string", "enum": ["flow", "map"]},
    "n": {"type": "integer", "minimum": 1, "maximum": 8},
    "eigenvalues": {
      "type": "array",
      "minItems": 1,
      "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}}
    },
    "epsilon": {"type": "number", "minimum": 0},
    "nilpotent_pattern": {
      "type": "array",
      "items": {"type": "integer", "minimum": 1}
    },
    "terms": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["component", "exponents", "re", "im"],
        "additionalProperties": false,
        "properties": {
          "component": {"type": "integer", "minimum": 1},
          "exponents": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
          "re": {"type": "number"},
          "im": {"type": "number"}
        }
      }
    },
    "options": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "q": {"type": "number", "exclusiveMinimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "radius_cap": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "degree_bound": {"type": "integer", "minimum": 2},
        "m": {"type": "integer", "minimum": 2},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "samples_per_sphere": {"type": "integer", "minimum": 1},
        "points": {"type": "integer", "minimum": 0},
        "degree": {"type": "integer", "minimum": 1}
      }
    }
  }
}
)pdnorm_schema";

} // namespace pdnorm::cli
