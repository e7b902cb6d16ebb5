#pragma once

// StructuredCommand: the JSON contract shared by both parsers and the edit
// engine, plus the schema validator that normalizes candidate JSON into it.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sdm/feature_types.hpp"

namespace sdm {

inline constexpr std::array<std::string_view, 4> kOperationTypes{"move", "rotate", "delete", "resize"};

inline std::string supported_operations_list() {
  std::string out;
  for (auto op : kOperationTypes) {
    if (!out.empty()) out += ", ";
    out += op;
  }
  return out;
}

inline bool is_supported_operation(std::string_view op) {
  for (auto known : kOperationTypes)
    if (known == op) return true;
  return false;
}

struct FeatureRef {
  std::string type;  // condition vocabulary key
  std::optional<std::string> hint;

  bool operator==(const FeatureRef&) const = default;
};

/// Canonical parameter objects:
///   move   {axis: "X"|"Y"|"Z", sign: "+"|"-", distance_mm: > 0}
///   rotate {axis, angle_deg in (-360, 360), != 0}
///   delete {}
///   resize {factor: > 0}
struct OperationSpec {
  std::string type;
  nlohmann::json parameters = nlohmann::json::object();

  bool operator==(const OperationSpec&) const = default;
};

struct CommandEntry {
  FeatureRef feature;
  OperationSpec operation;

  bool operator==(const CommandEntry&) const = default;
};

struct StructuredCommand {
  std::vector<CommandEntry> commands;
  bool verified = false;

  bool operator==(const StructuredCommand&) const = default;

  nlohmann::json to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : commands) {
      nlohmann::json feature{{"type", c.feature.type}};
      if (c.feature.hint) feature["hint"] = *c.feature.hint;
      list.push_back({{"feature", feature},
                      {"operation", {{"type", c.operation.type}, {"parameters", c.operation.parameters}}}});
    }
    return {{"commands", list}, {"verified", verified}};
  }
};

inline nlohmann::json move_parameters(char axis, char sign, double distance_mm) {
  return {{"axis", std::string(1, axis)}, {"sign", std::string(1, sign)}, {"distance_mm", distance_mm}};
}

inline nlohmann::json rotate_parameters(char axis, double angle_deg) {
  return {{"axis", std::string(1, axis)}, {"angle_deg", angle_deg}};
}

inline nlohmann::json resize_parameters(double factor) { return {{"factor", factor}}; }

struct SchemaCheck {
  std::optional<StructuredCommand> command;
  std::vector<std::string> violations;

  bool ok() const { return command.has_value(); }
};

namespace detail {

inline std::optional<char> parse_axis(const nlohmann::json& j) {
  if (!j.is_string()) return std::nullopt;
  const std::string slug = slugify(j.get<std::string>());
  if (slug == "x" || slug == "x_axis") return 'X';
  if (slug == "y" || slug == "y_axis") return 'Y';
  if (slug == "z" || slug == "z_axis") return 'Z';
  return std::nullopt;
}

inline std::optional<char> parse_sign(const nlohmann::json& j) {
  if (!j.is_string()) return std::nullopt;
  const auto s = j.get<std::string>();
  if (s == "+" || s == "positive") return '+';
  if (s == "-" || s == "\xE2\x88\x92" || s == "negative") return '-';
  return std::nullopt;
}

class ParameterReader {
 public:
  ParameterReader(const nlohmann::json& params, std::string where, std::string op, std::vector<std::string>& out)
      : params_(params), where_(std::move(where)), op_(std::move(op)), out_(out) {}

  const nlohmann::json* find(const char* key) {
    seen_.emplace_back(key);
    auto it = params_.find(key);
    if (it == params_.end() || it->is_null()) {
      out_.push_back(where_ + op_ + " requires " + key);
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const char* key) {
    const auto* j = find(key);
    if (!j) return std::nullopt;
    if (!j->is_number()) {
      out_.push_back(where_ + key + " must be a number");
      return std::nullopt;
    }
    const double v = j->get<double>();
    if (!std::isfinite(v)) {
      out_.push_back(where_ + key + " must be finite");
      return std::nullopt;
    }
    return v;
  }

  std::optional<char> axis() {
    const auto* j = find("axis");
    if (!j) return std::nullopt;
    auto a = parse_axis(*j);
    if (!a) out_.push_back(where_ + "axis must be one of X, Y, Z");
    return a;
  }

  void reject_unknown() {
    for (auto it = params_.begin(); it != params_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        out_.push_back(where_ + op_ + " does not take parameter '" + it.key() + "'");
    }
  }

  void fail(const std::string& msg) { out_.push_back(where_ + msg); }

 private:
  const nlohmann::json& params_;
  std::string where_, op_;
  std::vector<std::string>& out_;
  std::vector<std::string> seen_;
};

inline std::string vocabulary_text() {
  std::string out;
  for (auto v : kConditionVocabulary) {
    if (!out.empty()) out += ", ";
    out += v;
  }
  return out;
}

}  // namespace detail

/// Checks every invariant and reports all violations. On success the
/// command is normalized: vocabulary feature keys, upper-case axes, "+"/"-"
/// signs and floating-point numbers.
inline SchemaCheck validate_schema(const nlohmann::json& candidate) {
  SchemaCheck out;
  auto& v = out.violations;
  if (!candidate.is_object()) {
    v.push_back("command must be a JSON object");
    return out;
  }
  StructuredCommand cmd;
  auto verified = candidate.find("verified");
  if (verified == candidate.end()) {
    v.push_back("verified is required");
  } else if (!verified->is_boolean()) {
    v.push_back("verified must be a boolean");
  } else {
    cmd.verified = verified->get<bool>();
  }
  auto list = candidate.find("commands");
  if (list == candidate.end() || !list->is_array()) {
    v.push_back("commands must be an array");
    return out;
  }
  if (list->empty()) v.push_back("commands must contain at least one entry");

  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& entry = (*list)[i];
    const std::string where = "commands[" + std::to_string(i) + "]: ";
    if (!entry.is_object()) {
      v.push_back(where + "entry must be an object");
      continue;
    }
    CommandEntry ce;
    auto feature = entry.find("feature");
    if (feature == entry.end() || !feature->is_object()) {
      v.push_back(where + "feature object is required");
    } else {
      auto type = feature->find("type");
      if (type == feature->end() || !type->is_string()) {
        v.push_back(where + "feature.type must be a string");
      } else if (auto key = normalize_feature_name(type->get<std::string>())) {
        ce.feature.type = *key;
      } else {
        v.push_back(where + "unknown feature type '" + type->get<std::string>() +
                    "' (vocabulary: " + detail::vocabulary_text() + ")");
      }
      auto hint = feature->find("hint");
      if (hint != feature->end() && !hint->is_null()) {
        if (hint->is_string()) {
          if (!hint->get<std::string>().empty()) ce.feature.hint = hint->get<std::string>();
        } else {
          v.push_back(where + "feature.hint must be a string");
        }
      }
    }

    auto op = entry.find("operation");
    if (op == entry.end() || !op->is_object()) {
      v.push_back(where + "operation object is required");
      continue;
    }
    auto type = op->find("type");
    if (type == op->end() || !type->is_string()) {
      v.push_back(where + "operation.type must be a string");
      continue;
    }
    std::string op_type = detail::slugify(type->get<std::string>());
    if (!is_supported_operation(op_type)) {
      v.push_back(where + "unsupported operation '" + type->get<std::string>() +
                  "' (supported: " + supported_operations_list() + ")");
      continue;
    }
    ce.operation.type = op_type;
    nlohmann::json params = nlohmann::json::object();
    auto p = op->find("parameters");
    if (p != op->end() && !p->is_null()) {
      if (!p->is_object()) {
        v.push_back(where + "operation.parameters must be an object");
        continue;
      }
      params = *p;
    }
    detail::ParameterReader r(params, where, op_type, v);
    if (op_type == "move") {
      auto axis = r.axis();
      std::optional<char> sign;
      if (const auto* s = r.find("sign")) {
        sign = detail::parse_sign(*s);
        if (!sign) r.fail("sign must be \"+\" or \"-\"");
      }
      auto dist = r.number("distance_mm");
      if (dist && !(*dist > 0.0)) r.fail("distance_mm must be > 0");
      if (axis && sign && dist && *dist > 0.0) ce.operation.parameters = move_parameters(*axis, *sign, *dist);
    } else if (op_type == "rotate") {
      auto axis = r.axis();
      auto angle = r.number("angle_deg");
      const bool angle_ok = angle && *angle > -360.0 && *angle < 360.0 && *angle != 0.0;
      if (angle && !angle_ok) r.fail("angle_deg must lie in (-360, 360) and be non-zero");
      if (axis && angle_ok) ce.operation.parameters = rotate_parameters(*axis, *angle);
    } else if (op_type == "resize") {
      auto factor = r.number("factor");
      if (factor && !(*factor > 0.0)) r.fail("factor must be > 0");
      if (factor && *factor > 0.0) ce.operation.parameters = resize_parameters(*factor);
    }
    r.reject_unknown();
    cmd.commands.push_back(std::move(ce));
  }
  if (v.empty()) out.command = std::move(cmd);
  return out;
}

enum class ParseSource { kLlm, kGrammar };

inline const char* to_string(ParseSource s) { return s == ParseSource::kLlm ? "llm" : "grammar"; }

struct ParseFailure {
  std::string kind;    // unparseable | schema | transport | timeout
  std::string reason;  // human-readable, includes location where known
  int clause = 0;      // 1-based clause index (grammar), 0 when not applicable
  int offset = -1;     // byte offset into the input text, -1 when not applicable
  std::vector<std::string> violations;

  nlohmann::json to_json() const {
    nlohmann::json j{{"kind", kind}, {"reason", reason}};
    if (clause > 0) j["clause"] = clause;
    if (offset >= 0) j["offset"] = offset;
    if (!violations.empty()) j["violations"] = violations;
    return j;
  }
};

struct ParseResult {
  std::optional<StructuredCommand> structured;
  std::optional<ParseFailure> failure;
  ParseSource source = ParseSource::kGrammar;
  std::string raw;   // raw model output(s) kept for audit; empty for the grammar
  int attempts = 0;  // LLM round trips

  bool ok() const { return structured.has_value(); }

  nlohmann::json to_json() const {
    nlohmann::json j{{"source", to_string(source)}};
    if (structured) j["structured"] = structured->to_json();
    if (failure) j["failure"] = failure->to_json();
    if (source == ParseSource::kLlm) {
      j["raw"] = raw;
      j["attempts"] = attempts;
    }
    return j;
  }
};

}  // namespace sdm
