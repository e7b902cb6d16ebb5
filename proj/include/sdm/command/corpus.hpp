#pragma once

// Command corpus (JSON lines: {text, gold, tier, grammar_supported}) and
// exact-match scoring against gold StructuredCommands.

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdm/command/structured.hpp"
#include "sdm/error.hpp"

namespace sdm {

struct CorpusEntry {
  std::string text;
  StructuredCommand gold;
  std::string tier;  // simple | complex
  bool grammar_supported = true;
  int line = 0;
};

inline std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<CorpusEntry> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(number) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    }
    CorpusEntry e;
    e.line = number;
    try {
      e.text = j.at("text").get<std::string>();
      e.tier = j.at("tier").get<std::string>();
      e.grammar_supported = j.value("grammar_supported", true);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(where + ex.what());
    }
    if (e.tier != "simple" && e.tier != "complex") throw ParseError(where + "tier must be simple or complex");
    auto check = validate_schema(j.at("gold"));
    if (!check.ok()) throw ParseError(where + "gold is not schema-valid: " + check.violations.front());
    e.gold = std::move(*check.command);
    out.push_back(std::move(e));
  }
  return out;
}

struct CorpusOutcome {
  CorpusEntry entry;
  ParseResult result;
  bool match = false;
};

struct CorpusReport {
  std::vector<CorpusOutcome> outcomes;
  int total = 0, matched = 0;
  int supported_total = 0, supported_matched = 0;
  int simple_total = 0, simple_matched = 0;
  int complex_total = 0, complex_matched = 0;

  double accuracy() const { return total ? static_cast<double>(matched) / total : 0.0; }

  nlohmann::json to_json() const {
    nlohmann::json misses = nlohmann::json::array();
    for (const auto& o : outcomes) {
      if (o.match) continue;
      nlohmann::json m{{"line", o.entry.line}, {"text", o.entry.text}};
      if (o.result.failure) m["failure"] = o.result.failure->to_json();
      if (o.result.structured) m["got"] = o.result.structured->to_json();
      misses.push_back(m);
    }
    return {{"total", total},
            {"matched", matched},
            {"accuracy", accuracy()},
            {"grammar_supported", {{"total", supported_total}, {"matched", supported_matched}}},
            {"simple", {{"total", simple_total}, {"matched", simple_matched}}},
            {"complex", {{"total", complex_total}, {"matched", complex_matched}}},
            {"misses", misses}};
  }
};

/// Exact match: the parsed command equals the gold after normalization,
/// including feature hints and the verified flag.
inline CorpusReport score_corpus(const std::vector<CorpusEntry>& corpus,
                                 const std::function<ParseResult(const std::string&)>& parse) {
  CorpusReport r;
  for (const auto& e : corpus) {
    CorpusOutcome o;
    o.entry = e;
    o.result = parse(e.text);
    o.match = o.result.structured && *o.result.structured == e.gold;
    ++r.total;
    r.matched += o.match;
    if (e.grammar_supported) {
      ++r.supported_total;
      r.supported_matched += o.match;
    }
    if (e.tier == "simple") {
      ++r.simple_total;
      r.simple_matched += o.match;
    } else {
      ++r.complex_total;
      r.complex_matched += o.match;
    }
    r.outcomes.push_back(std::move(o));
  }
  return r;
}

}  // namespace sdm
