#include "rigidda/schema.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rigidda {

using nlohmann::json;

namespace {

bool has_type(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    if (v.is_number_float()) {
      const double d = v.get<double>();
      return std::isfinite(d) && d == std::floor(d);
    }
    return false;
  }
  throw std::logic_error("schema: unknown type '" + type + "'");
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& v, const json& s, const std::string& at) {
    if (s.is_boolean()) {
      if (!s.get<bool>()) fail(at, "not allowed");
      return;
    }
    if (auto ref = s.find("$ref"); ref != s.end()) {
      check(v, resolve(ref->get<std::string>()), at);
      return;
    }
    if (auto t = s.find("type"); t != s.end()) {
      bool ok = false;
      if (t->is_array()) {
        for (const auto& one : *t) ok = ok || has_type(v, one.get<std::string>());
      } else {
        ok = has_type(v, t->get<std::string>());
      }
      if (!ok) {
        fail(at, "expected type " + t->dump());
        return;
      }
    }
    if (auto any = s.find("anyOf"); any != s.end()) {
      bool matched = false;
      for (const auto& option : *any) {
        Validator sub(root_);
        sub.check(v, option, at);
        matched = matched || sub.errors.empty();
      }
      if (!matched) fail(at, "matches none of the allowed forms");
    }
    if (auto c = s.find("const"); c != s.end() && *c != v) fail(at, "must equal " + c->dump());
    if (auto e = s.find("enum"); e != s.end()) {
      bool found = false;
      for (const auto& option : *e) found = found || option == v;
      if (!found) fail(at, "value not in " + e->dump());
    }
    if (v.is_number()) {
      const double d = v.get<double>();
      if (!std::isfinite(d)) fail(at, "number must be finite");
      if (auto m = s.find("minimum"); m != s.end() && d < m->get<double>())
        fail(at, "must be >= " + m->dump());
      if (auto m = s.find("maximum"); m != s.end() && d > m->get<double>())
        fail(at, "must be <= " + m->dump());
      if (auto m = s.find("exclusiveMinimum"); m != s.end() && d <= m->get<double>())
        fail(at, "must be > " + m->dump());
      if (auto m = s.find("exclusiveMaximum"); m != s.end() && d >= m->get<double>())
        fail(at, "must be < " + m->dump());
    }
    if (v.is_array()) {
      if (auto m = s.find("minItems"); m != s.end() && v.size() < m->get<std::size_t>())
        fail(at, "needs at least " + m->dump() + " items");
      if (auto m = s.find("maxItems"); m != s.end() && v.size() > m->get<std::size_t>())
        fail(at, "allows at most " + m->dump() + " items");
      if (auto items = s.find("items"); items != s.end())
        for (std::size_t i = 0; i < v.size(); ++i)
          check(v[i], *items, at + "/" + std::to_string(i));
    }
    if (v.is_object()) {
      const json empty = json::object();
      const auto pit = s.find("properties");
      const json& props = pit != s.end() ? *pit : empty;
      if (auto req = s.find("required"); req != s.end())
        for (const auto& name : *req)
          if (!v.contains(name.get<std::string>()))
            fail(at, "missing required property '" + name.get<std::string>() + "'");
      const auto extra = s.find("additionalProperties");
      for (auto it = v.begin(); it != v.end(); ++it) {
        const std::string child = at + "/" + it.key();
        if (auto p = props.find(it.key()); p != props.end()) {
          check(it.value(), *p, child);
        } else if (extra != s.end()) {
          check(it.value(), *extra, child);
        }
      }
    }
  }

  std::vector<std::string> errors;

 private:
  const json& resolve(const std::string& ref) const {
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) throw std::logic_error("schema: unsupported $ref " + ref);
    return root_.at("$defs").at(ref.substr(prefix.size()));
  }

  void fail(const std::string& at, const std::string& msg) {
    errors.push_back((at.empty() ? std::string("/") : at) + ": " + msg);
  }

  const json& root_;
};

}  // namespace

std::vector<std::string> schema_errors(const json& instance, const json& schema) {
  Validator v(schema);
  v.check(instance, schema, "");
  return std::move(v.errors);
}

void validate_against_schema(const json& instance, const json& schema, const std::string& what) {
  const auto errs = schema_errors(instance, schema);
  if (errs.empty()) return;
  std::ostringstream os;
  os << what << " does not match its schema:";
  for (const auto& e : errs) os << "\n  " << e;
  throw std::invalid_argument(os.str());
}

}  // namespace rigidda
