#pragma once

// Deterministic offline command grammar.
//
//   command := clause { ("and" | "then" | "," | ";" | ".") clause }
//   clause  := [filler] verb feature params
//            | params                      (repeats the previous verb/feature)
//   feature := ("it" | "them") | {hint-word} feature-name ["feature" | "faces"]
//   params  := numbers with units, axes, direction words, rotation sense
//
// Everything is lower-cased first; offsets in diagnostics are byte offsets
// into the original text. See docs/axis_conventions.md for the direction
// table. The parser never throws.

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdm/command/structured.hpp"
#include "sdm/feature_types.hpp"

namespace sdm {
namespace grammar {

enum class TokenKind { kWord, kNumber, kSign, kPercent, kSeparator };

struct Token {
  TokenKind kind = TokenKind::kWord;
  std::string text;
  double value = 0.0;  // numbers; +1/-1 for signs
  int offset = 0;
};

inline bool is_alpha(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  const std::size_t n = text.size();
  auto at = [&](std::size_t i) -> unsigned char { return i < n ? static_cast<unsigned char>(text[i]) : 0; };
  auto starts_number = [&](std::size_t i) { return is_digit(at(i)) || (at(i) == '.' && is_digit(at(i + 1))); };
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = at(i);
    const int off = static_cast<int>(i);
    // U+2212 MINUS SIGN behaves like '-'.
    const bool unicode_minus = c == 0xE2 && at(i + 1) == 0x88 && at(i + 2) == 0x92;
    if (std::isspace(c)) {
      ++i;
    } else if (c == 0xC2 && at(i + 1) == 0xB0) {  // degree sign
      out.push_back({TokenKind::kWord, "degrees", 0.0, off});
      i += 2;
    } else if (starts_number(i)) {
      std::size_t j = i;
      while (is_digit(at(j))) ++j;
      if (at(j) == '.' && is_digit(at(j + 1))) {
        ++j;
        while (is_digit(at(j))) ++j;
      }
      double v = 0.0;
      std::from_chars(text.data() + i, text.data() + j, v);
      out.push_back({TokenKind::kNumber, std::string(text.substr(i, j - i)), v, off});
      i = j;
    } else if (c == '+' || c == '-' || unicode_minus) {
      const std::size_t width = unicode_minus ? 3 : 1;
      const bool glued_left = i > 0 && (is_alpha(at(i - 1)) || is_digit(at(i - 1)));
      const double sign = c == '+' ? 1.0 : -1.0;
      if (!glued_left && starts_number(i + width)) {
        std::size_t j = i + width;
        while (is_digit(at(j))) ++j;
        if (at(j) == '.' && is_digit(at(j + 1))) {
          ++j;
          while (is_digit(at(j))) ++j;
        }
        double v = 0.0;
        std::from_chars(text.data() + i + width, text.data() + j, v);
        out.push_back({TokenKind::kNumber, std::string(text.substr(i, j - i)), sign * v, off});
        i = j;
      } else {
        // "-x" is a signed axis; "x-axis" / "v-slot" hyphens are dropped.
        if (!glued_left && is_alpha(at(i + width))) out.push_back({TokenKind::kSign, c == '+' ? "+" : "-", sign, off});
        i += width;
      }
    } else if (is_alpha(c)) {
      std::size_t j = i;
      std::string word;
      while (is_alpha(at(j))) word.push_back(static_cast<char>(std::tolower(at(j++))));
      out.push_back({TokenKind::kWord, std::move(word), 0.0, off});
      i = j;
    } else if (c == ',' || c == ';' || c == '.' || c == ':' || c == '!' || c == '?') {
      out.push_back({TokenKind::kSeparator, std::string(1, static_cast<char>(c)), 0.0, off});
      ++i;
    } else if (c == '%') {
      out.push_back({TokenKind::kPercent, "%", 0.0, off});
      ++i;
    } else if (c >= 0x80) {
      // Any other non-ASCII run becomes a word so it is reported, not lost.
      std::size_t j = i;
      while (at(j) >= 0x80) ++j;
      out.push_back({TokenKind::kWord, std::string(text.substr(i, j - i)), 0.0, off});
      i = j;
    } else {
      ++i;  // quotes, brackets and similar punctuation carry no meaning here
    }
  }
  return out;
}

namespace detail {

template <std::size_t N>
bool in(const std::string& w, const std::array<std::string_view, N>& set) {
  for (auto s : set)
    if (s == w) return true;
  return false;
}

inline constexpr std::array<std::string_view, 2> kClauseWords{"and", "then"};
inline constexpr std::array<std::string_view, 9> kFillers{"please", "also",  "next",       "finally",     "now",
                                                          "lastly", "first", "afterwards", "additionally"};
inline constexpr std::array<std::string_view, 7> kDeterminers{"the", "a", "an", "this", "that", "these", "those"};
inline constexpr std::array<std::string_view, 10> kPrepositions{"by", "along", "about", "around", "to",
                                                                "in", "on",    "toward", "towards", "at"};
inline constexpr std::array<std::string_view, 4> kFeatureTail{"feature", "features", "face", "faces"};
inline constexpr std::array<std::string_view, 13> kIgnorable{"by",     "along", "about",  "around",    "in",
                                                             "on",     "the",   "a",      "with",      "of",
                                                             "toward", "towards", "direction"};
inline constexpr std::array<std::string_view, 5> kMillimeters{"mm", "millimeter", "millimeters", "millimetre",
                                                              "millimetres"};
inline constexpr std::array<std::string_view, 5> kCentimeters{"cm", "centimeter", "centimeters", "centimetre",
                                                              "centimetres"};
inline constexpr std::array<std::string_view, 4> kDegrees{"degrees", "degree", "deg", "degs"};

enum class Flavor { kNeutral, kGrow, kShrink };

struct Verb {
  std::string_view word;
  std::string_view op;
  Flavor flavor;
};

inline constexpr std::array<Verb, 12> kVerbs{{
    {"move", "move", Flavor::kNeutral},
    {"translate", "move", Flavor::kNeutral},
    {"shift", "move", Flavor::kNeutral},
    {"rotate", "rotate", Flavor::kNeutral},
    {"turn", "rotate", Flavor::kNeutral},
    {"delete", "delete", Flavor::kNeutral},
    {"remove", "delete", Flavor::kNeutral},
    {"scale", "resize", Flavor::kNeutral},
    {"resize", "resize", Flavor::kNeutral},
    {"enlarge", "resize", Flavor::kGrow},
    {"shrink", "resize", Flavor::kShrink},
    {"grow", "resize", Flavor::kGrow},
}};

inline const Verb* find_verb(const std::string& w) {
  for (const auto& v : kVerbs)
    if (v.word == w) return &v;
  return nullptr;
}

struct Direction {
  std::string_view word;
  char axis;
  int sign;
};

inline constexpr std::array<Direction, 12> kDirections{{
    {"right", 'X', +1},    {"left", 'X', -1},      {"forward", 'Y', +1},  {"forwards", 'Y', +1},
    {"back", 'Y', -1},     {"backward", 'Y', -1},  {"backwards", 'Y', -1}, {"up", 'Z', +1},
    {"upward", 'Z', +1},   {"upwards", 'Z', +1},   {"down", 'Z', -1},     {"downward", 'Z', -1},
}};

inline const Direction* find_direction(const std::string& w) {
  if (w == "downwards") return find_direction("downward");
  for (const auto& d : kDirections)
    if (d.word == w) return &d;
  return nullptr;
}

struct Failure {
  std::string message;
  int offset = -1;
};

enum class Unit { kNone, kMm, kDeg, kPercent };

struct Quantity {
  double value = 0.0;
  Unit unit = Unit::kNone;
  bool after_to = false;
  int offset = 0;
};

struct Params {
  std::vector<Quantity> quantities;
  std::optional<char> axis;
  std::optional<int> axis_sign;  // from "+x", "negative x"
  const Direction* direction = nullptr;
  int direction_offset = -1;
  std::optional<int> sense;  // +1 counter-clockwise, -1 clockwise
  std::optional<int> scale_hint;
  int first_offset = -1;
};

inline std::optional<Failure> read_params(const std::vector<Token>& t, std::size_t pos, Params& p) {
  std::optional<int> pending_sign;
  int pending_offset = -1;
  bool to_pending = false;
  auto conflict = [](const std::string& what, int off) { return Failure{"conflicting " + what, off}; };
  for (std::size_t i = pos; i < t.size(); ++i) {
    const Token& tok = t[i];
    if (p.first_offset < 0) p.first_offset = tok.offset;
    if (tok.kind == TokenKind::kNumber) {
      Quantity q{tok.value, Unit::kNone, to_pending, tok.offset};
      to_pending = false;
      if (i + 1 < t.size()) {
        const Token& u = t[i + 1];
        if (u.kind == TokenKind::kPercent || (u.kind == TokenKind::kWord && u.text == "percent")) {
          q.unit = Unit::kPercent;
          ++i;
        } else if (u.kind == TokenKind::kWord && in(u.text, kMillimeters)) {
          q.unit = Unit::kMm;
          ++i;
        } else if (u.kind == TokenKind::kWord && in(u.text, kCentimeters)) {
          q.unit = Unit::kMm;
          q.value *= 10.0;
          ++i;
        } else if (u.kind == TokenKind::kWord && in(u.text, kDegrees)) {
          q.unit = Unit::kDeg;
          ++i;
        }
      }
      p.quantities.push_back(q);
      continue;
    }
    if (tok.kind == TokenKind::kSign) {
      pending_sign = static_cast<int>(tok.value);
      pending_offset = tok.offset;
      continue;
    }
    if (tok.kind == TokenKind::kPercent) return Failure{"'%' without a number", tok.offset};
    if (tok.kind != TokenKind::kWord) return Failure{"unexpected '" + tok.text + "'", tok.offset};
    const std::string& w = tok.text;
    if (w == "x" || w == "y" || w == "z") {
      const char axis = static_cast<char>(w[0] - 'a' + 'A');
      if (p.axis && *p.axis != axis) return conflict("axes", tok.offset);
      p.axis = axis;
      if (pending_sign) {
        if (p.axis_sign && *p.axis_sign != *pending_sign) return conflict("signs", tok.offset);
        p.axis_sign = pending_sign;
        pending_sign.reset();
      }
    } else if (w == "axis") {
      // "x axis"; the axis letter carries the meaning
    } else if (w == "positive" || w == "plus" || w == "negative" || w == "minus") {
      pending_sign = (w == "positive" || w == "plus") ? 1 : -1;
      pending_offset = tok.offset;
    } else if (const Direction* d = find_direction(w)) {
      if (p.direction && (p.direction->axis != d->axis || p.direction->sign != d->sign))
        return conflict("directions", tok.offset);
      p.direction = d;
      p.direction_offset = tok.offset;
    } else if (w == "clockwise" || w == "cw") {
      if (p.sense && *p.sense != -1) return conflict("rotation senses", tok.offset);
      p.sense = -1;
    } else if (w == "counterclockwise" || w == "anticlockwise" || w == "ccw") {
      if (p.sense && *p.sense != 1) return conflict("rotation senses", tok.offset);
      p.sense = 1;
    } else if ((w == "counter" || w == "anti") && i + 1 < t.size() && t[i + 1].text == "clockwise") {
      if (p.sense && *p.sense != 1) return conflict("rotation senses", tok.offset);
      p.sense = 1;
      ++i;
    } else if (w == "to") {
      to_pending = true;
    } else if (w == "factor" || w == "an" || w == "its" || w == "amount" || w == "distance" || w == "angle") {
      // "by a factor of 2", "by an angle of 30 degrees"
    } else if (in(w, kIgnorable)) {
    } else {
      return Failure{"unexpected word '" + w + "'", tok.offset};
    }
  }
  if (pending_sign) return Failure{"sign is not followed by an axis", pending_offset};
  return std::nullopt;
}

inline std::optional<Failure> single_quantity(const Params& p, const char* what, int clause_offset, Quantity& q) {
  if (p.quantities.empty()) return Failure{std::string("missing ") + what, p.first_offset >= 0 ? p.first_offset : clause_offset};
  if (p.quantities.size() > 1) return Failure{std::string("more than one ") + what, p.quantities[1].offset};
  q = p.quantities[0];
  return std::nullopt;
}

inline std::optional<Failure> build_operation(std::string_view op, Flavor flavor, const Params& p, int clause_offset,
                                              OperationSpec& out) {
  out.type = std::string(op);
  if (op == "delete") {
    if (p.first_offset >= 0) return Failure{"delete takes no parameters", p.first_offset};
    out.parameters = nlohmann::json::object();
    return std::nullopt;
  }
  Quantity q;
  if (op == "move") {
    if (auto f = single_quantity(p, "distance", clause_offset, q)) return f;
    if (q.unit != Unit::kNone && q.unit != Unit::kMm) return Failure{"expected a distance in millimeters", q.offset};
    if (p.sense) return Failure{"rotation sense given for a move", p.first_offset};
    char axis = 0;
    int sign = 1;
    if (p.axis) {
      axis = *p.axis;
    } else if (p.direction) {
      axis = p.direction->axis;
    } else {
      return Failure{"move needs an axis or a direction word", q.offset};
    }
    if (p.axis_sign) {
      sign = *p.axis_sign;
    } else if (p.direction) {
      sign = p.direction->sign;
    }
    double d = q.value;
    if (d < 0.0) {
      sign = -sign;
      d = -d;
    }
    if (!(d > 0.0)) return Failure{"distance must be greater than zero", q.offset};
    out.parameters = move_parameters(axis, sign > 0 ? '+' : '-', d);
    return std::nullopt;
  }
  if (op == "rotate") {
    if (auto f = single_quantity(p, "angle", clause_offset, q)) return f;
    if (q.unit != Unit::kNone && q.unit != Unit::kDeg) return Failure{"expected an angle in degrees", q.offset};
    if (p.direction) return Failure{"rotate takes an axis, not a direction", p.direction_offset};
    if (p.axis_sign) return Failure{"rotation axis cannot carry a sign; use clockwise/counterclockwise", q.offset};
    double angle = q.value * (p.sense ? *p.sense : 1);
    if (!(angle > -360.0 && angle < 360.0) || angle == 0.0)
      return Failure{"angle must lie in (-360, 360) degrees and be non-zero", q.offset};
    out.parameters = rotate_parameters(p.axis.value_or('Z'), angle);
    return std::nullopt;
  }
  // resize
  if (auto f = single_quantity(p, "scale factor", clause_offset, q)) return f;
  if (p.axis || p.sense) return Failure{"resize takes only a factor or percentage", p.first_offset};
  int mod = 0;
  if (p.direction) {
    if (p.direction->axis != 'Z') return Failure{"resize takes only a factor or percentage", p.direction_offset};
    mod = p.direction->sign;  // "scale up/down by 20%"
  }
  if (flavor == Flavor::kGrow) mod = 1;
  if (flavor == Flavor::kShrink) mod = -1;
  double factor = 0.0;
  if (q.unit == Unit::kPercent) {
    if (q.after_to || mod == 0) {
      factor = q.value / 100.0;
    } else {
      factor = (100.0 + mod * q.value) / 100.0;
    }
  } else if (q.unit == Unit::kNone) {
    factor = (flavor == Flavor::kShrink && q.value > 1.0) ? 1.0 / q.value : q.value;
  } else {
    return Failure{"expected a factor or percentage", q.offset};
  }
  if (!(factor > 0.0)) return Failure{"scale factor must be greater than zero", q.offset};
  out.parameters = resize_parameters(factor);
  return std::nullopt;
}

struct Context {
  std::optional<FeatureRef> feature;
  std::string op;
  Flavor flavor = Flavor::kNeutral;
};

/// Longest feature name starting at the earliest possible word of [pos, end).
inline bool match_feature(const std::vector<Token>& t, std::size_t pos, std::size_t end, std::size_t& start,
                          std::size_t& length, std::string& key) {
  for (std::size_t s = pos; s < end; ++s) {
    for (std::size_t len = std::min<std::size_t>(4, end - s); len >= 1; --len) {
      std::string phrase;
      for (std::size_t k = s; k < s + len; ++k) phrase += (phrase.empty() ? "" : "_") + t[k].text;
      if (auto norm = normalize_feature_name(phrase)) {
        start = s;
        length = len;
        key = *norm;
        return true;
      }
    }
  }
  return false;
}

inline std::optional<Failure> parse_clause(const std::vector<Token>& t, Context& ctx, CommandEntry& out) {
  std::size_t i = 0;
  while (i < t.size() && t[i].kind == TokenKind::kWord && in(t[i].text, kFillers)) ++i;
  const int clause_offset = t.front().offset;
  const Verb* verb = i < t.size() && t[i].kind == TokenKind::kWord ? find_verb(t[i].text) : nullptr;
  if (!verb) {
    // "..., then 2 mm forward": same verb and feature as before.
    const bool has_number = std::any_of(t.begin() + static_cast<std::ptrdiff_t>(i), t.end(),
                                        [](const Token& x) { return x.kind == TokenKind::kNumber; });
    if (ctx.feature && !ctx.op.empty() && has_number) {
      Params p;
      if (auto f = read_params(t, i, p)) return f;
      out.feature = *ctx.feature;
      return build_operation(ctx.op, ctx.flavor, p, clause_offset, out.operation);
    }
    const std::string shown = i < t.size() ? t[i].text : t.front().text;
    return Failure{"no operation verb (expected move, translate, shift, rotate, turn, delete, remove, scale, resize, "
                   "enlarge or shrink) near '" + shown + "'",
                   i < t.size() ? t[i].offset : clause_offset};
  }
  const int verb_offset = t[i].offset;
  ++i;

  FeatureRef feature;
  if (i < t.size() && t[i].kind == TokenKind::kWord && (t[i].text == "it" || t[i].text == "them")) {
    if (!ctx.feature) return Failure{"'" + t[i].text + "' does not refer to an earlier feature", t[i].offset};
    feature = *ctx.feature;
    ++i;
  } else {
    std::size_t end = i;
    while (end < t.size() && t[end].kind == TokenKind::kWord && !in(t[end].text, kPrepositions)) ++end;
    std::size_t start = 0, length = 0;
    std::string key;
    if (!match_feature(t, i, end, start, length, key)) {
      const int off = i < t.size() ? t[i].offset : verb_offset;
      return Failure{"no recognized feature after '" + std::string(verb->word) + "' (vocabulary: " +
                         sdm::detail::vocabulary_text() + ")",
                     off};
    }
    std::string hint;
    for (std::size_t k = i; k < start; ++k) {
      if (in(t[k].text, kDeterminers)) continue;
      hint += (hint.empty() ? "" : " ") + t[k].text;
    }
    feature.type = key;
    if (!hint.empty()) feature.hint = hint;
    i = start + length;
    while (i < t.size() && t[i].kind == TokenKind::kWord && in(t[i].text, kFeatureTail)) ++i;
  }

  Params p;
  if (auto f = read_params(t, i, p)) return f;
  out.feature = feature;
  if (auto f = build_operation(verb->op, verb->flavor, p, clause_offset, out.operation)) return f;
  ctx.feature = feature;
  ctx.op = std::string(verb->op);
  ctx.flavor = verb->flavor;
  return std::nullopt;
}

}  // namespace detail

/// Splits on and/then/punctuation and parses each clause in order.
inline ParseResult parse_with_grammar(std::string_view text) {
  ParseResult result;
  result.source = ParseSource::kGrammar;
  auto fail = [&](int clause, int offset, const std::string& message, std::string kind = "unparseable") {
    std::string reason = clause > 0 ? "clause " + std::to_string(clause) + ", offset " + std::to_string(offset) + ": " + message
                                    : message;
    result.failure = ParseFailure{std::move(kind), std::move(reason), clause, offset, {}};
    return result;
  };
  try {
    const auto tokens = tokenize(text);
    std::vector<std::vector<Token>> clauses(1);
    for (const auto& tok : tokens) {
      const bool split = tok.kind == TokenKind::kSeparator ||
                         (tok.kind == TokenKind::kWord && detail::in(tok.text, detail::kClauseWords));
      if (split) {
        if (!clauses.back().empty()) clauses.emplace_back();
      } else {
        clauses.back().push_back(tok);
      }
    }
    if (clauses.back().empty()) clauses.pop_back();
    if (clauses.empty()) return fail(0, 0, "empty command");

    detail::Context ctx;
    StructuredCommand cmd;
    for (std::size_t c = 0; c < clauses.size(); ++c) {
      const auto& clause = clauses[c];
      const bool filler_only = std::all_of(clause.begin(), clause.end(), [](const Token& x) {
        return x.kind == TokenKind::kWord && detail::in(x.text, detail::kFillers);
      });
      if (filler_only) continue;
      CommandEntry entry;
      if (auto f = detail::parse_clause(clause, ctx, entry)) return fail(static_cast<int>(c) + 1, f->offset, f->message);
      // A verbless continuation updates nothing but must still be recorded.
      cmd.commands.push_back(std::move(entry));
    }
    if (cmd.commands.empty()) return fail(1, 0, "no operation found");
    cmd.verified = true;
    auto check = validate_schema(cmd.to_json());
    if (!check.ok()) {
      result = fail(0, -1, "grammar output failed the schema", "schema");
      result.failure->violations = check.violations;
      return result;
    }
    result.structured = std::move(check.command);
  } catch (const std::exception& e) {
    return fail(0, -1, std::string("internal parser error: ") + e.what());
  }
  return result;
}

}  // namespace grammar

using grammar::parse_with_grammar;

}  // namespace sdm
