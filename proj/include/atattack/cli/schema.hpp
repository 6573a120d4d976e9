#ifndef ATATTACK_CLI_SCHEMA_HPP
#define ATATTACK_CLI_SCHEMA_HPP

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atattack/core/error.hpp"

namespace atattack::cli {

using nlohmann::json;

/// Validator for the subset of JSON Schema (2020-12) used by the shipped
/// schemas: type, enum, const, properties, required, additionalProperties
/// (boolean), items, minItems, minimum, maximum, exclusiveMinimum,
/// exclusiveMaximum, and local "#/$defs/..." references. Other keywords are
/// ignored.
class SchemaValidator {
 public:
  explicit SchemaValidator(json schema) : root_(std::move(schema)) {}

  /// Every violation as "<json pointer>: <message>"; empty when valid.
  std::vector<std::string> errors(const json& doc) const {
    std::vector<std::string> out;
    check(root_, doc, "", out);
    return out;
  }

  void validate(const json& doc) const {
    auto errs = errors(doc);
    if (errs.empty()) return;
    std::string msg = "config does not match the schema:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }

 private:
  const json& resolve(const std::string& ref) const {
    if (ref.rfind("#/", 0) != 0) throw ConfigError("unsupported schema reference " + ref);
    return root_.at(json::json_pointer(ref.substr(1)));
  }

  static bool has_type(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<int64_t>(v.get<double>())));
    if (t == "number") return v.is_number();
    return false;
  }

  void check(const json& s, const json& v, const std::string& at, std::vector<std::string>& out) const {
    const std::string where = at.empty() ? "/" : at;
    if (s.contains("$ref")) check(resolve(s["$ref"].get<std::string>()), v, at, out);
    if (s.contains("type")) {
      bool ok = false;
      if (s["type"].is_array()) {
        for (const auto& t : s["type"]) ok = ok || has_type(v, t.get<std::string>());
      } else {
        ok = has_type(v, s["type"].get<std::string>());
      }
      if (!ok) {
        out.push_back(where + ": expected type " + s["type"].dump() + ", got " + v.type_name());
        return;
      }
    }
    if (s.contains("enum")) {
      bool found = false;
      for (const auto& e : s["enum"]) found = found || e == v;
      if (!found) out.push_back(where + ": value " + v.dump() + " not in " + s["enum"].dump());
    }
    if (s.contains("const") && s["const"] != v) out.push_back(where + ": expected " + s["const"].dump());
    if (v.is_number()) {
      const double x = v.get<double>();
      if (s.contains("minimum") && x < s["minimum"].get<double>())
        out.push_back(where + ": " + v.dump() + " < minimum " + s["minimum"].dump());
      if (s.contains("maximum") && x > s["maximum"].get<double>())
        out.push_back(where + ": " + v.dump() + " > maximum " + s["maximum"].dump());
      if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>())
        out.push_back(where + ": " + v.dump() + " must be > " + s["exclusiveMinimum"].dump());
      if (s.contains("exclusiveMaximum") && x >= s["exclusiveMaximum"].get<double>())
        out.push_back(where + ": " + v.dump() + " must be < " + s["exclusiveMaximum"].dump());
    }
    if (v.is_object()) {
      if (s.contains("required"))
        for (const auto& r : s["required"])
          if (!v.contains(r.get<std::string>())) out.push_back(where + ": missing required property " + r.dump());
      const json* props = s.contains("properties") ? &s["properties"] : nullptr;
      for (const auto& [k, child] : v.items()) {
        const auto path = at + "/" + k;
        if (props && props->contains(k)) check((*props)[k], child, path, out);
        else if (s.contains("additionalProperties") && s["additionalProperties"] == false)
          out.push_back(path + ": unknown property");
      }
    }
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s["minItems"].get<size_t>())
        out.push_back(where + ": needs at least " + s["minItems"].dump() + " items");
      if (s.contains("items"))
        for (size_t i = 0; i < v.size(); ++i) check(s["items"], v[i], at + "/" + std::to_string(i), out);
    }
  }

  json root_;
};

}  // namespace atattack::cli

#endif  // ATATTACK_CLI_SCHEMA_HPP
