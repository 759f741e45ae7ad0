#pragma once

// Validator for the JSON Schema keywords used by docs/problem_spec.schema.json:
// type, enum, required, properties, additionalProperties (boolean), items
// (single schema), minItems, maxItems, minimum, maximum, exclusiveMinimum.
// Unknown keywords are ignored.

#include <string>

#include <nlohmann/json.hpp>

#include <pdnorm/core.hpp>

namespace pdnorm::cli
{

namespace detail
{

inline bool type_matches(const nlohmann::json &v, const std::string &type)
{
    if (type == "object") {
        return v.is_object();
    }
    if (type == "array") {
        return v.is_array();
    }
    if (type == "string") {
        return v.is_string();
    }
    if (type == "boolean") {
        return v.is_boolean();
    }
    if (type == "integer") {
        return v.is_number_integer();
    }
    if (type == "number") {
        return v.is_number();
    }
    if (type == "null") {
        return v.is_null();
    }
    return false;
}

inline void validate_at(const nlohmann::json &schema, const nlohmann::json &v, const std::string &path)
{
    auto fail = [&](const std::string &msg) { throw InvalidInput("schema: " + (path.empty() ? "/" : path) + ": " + msg); };
    if (auto it = schema.find("type"); it != schema.end()) {
        bool ok = false;
        if (it->is_array()) {
            for (const auto &t : *it) {
                ok = ok || type_matches(v, t.get<std::string>());
            }
        } else {
            ok = type_matches(v, it->get<std::string>());
        }
        if (!ok) {
            fail("expected type " + it->dump());
        }
    }
    if (auto it = schema.find("enum"); it != schema.end()) {
        bool found = false;
        for (const auto &e : *it) {
            found = found || e == v;
        }
        if (!found) {
            fail("value " + v.dump() + " not in " + it->dump());
        }
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (auto it = schema.find("minimum"); it != schema.end() && x < it->get<double>()) {
            fail("below minimum " + it->dump());
        }
        if (auto it = schema.find("maximum"); it != schema.end() && x > it->get<double>()) {
            fail("above maximum " + it->dump());
        }
        if (auto it = schema.find("exclusiveMinimum"); it != schema.end() && x <= it->get<double>()) {
            fail("must exceed " + it->dump());
        }
    }
    if (v.is_array()) {
        if (auto it = schema.find("minItems"); it != schema.end() && v.size() < it->get<std::size_t>()) {
            fail("fewer than " + it->dump() + " items");
        }
        if (auto it = schema.find("maxItems"); it != schema.end() && v.size() > it->get<std::size_t>()) {
            fail("more than " + it->dump() + " items");
        }
        if (auto it = schema.find("items"); it != schema.end()) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                validate_at(*it, v[i], path + "/" + std::to_string(i));
            }
        }
    }
    if (v.is_object()) {
        if (auto it = schema.find("required"); it != schema.end()) {
            for (const auto &key : *it) {
                if (!v.contains(key.get<std::string>())) {
                    fail("missing required field " + key.dump());
                }
            }
        }
        const auto props = schema.find("properties");
        const auto extra = schema.find("additionalProperties");
        for (const auto &[key, val] : v.items()) {
            if (props != schema.end() && props->contains(key)) {
                validate_at((*props)[key], val, path + "/" + key);
            } else if (extra != schema.end() && extra->is_boolean() && !extra->get<bool>()) {
                fail("unexpected field \"" + key + "\"");
            }
        }
    }
}

} // namespace detail

inline void validate(const nlohmann::json &schema, const nlohmann::json &doc)
{
    detail::validate_at(schema, doc, "");
}

} // namespace pdnorm::cli
