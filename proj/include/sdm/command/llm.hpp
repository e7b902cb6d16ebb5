#pragma once

// LLM command parsing over an OpenAI-compatible chat-completions endpoint.

#include <chrono>
#include <cstdlib>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include <json.hpp>

#include "sdm/command/prompt.hpp"
#include "sdm/command/structured.hpp"
#include "sdm/http.hpp"

namespace sdm {

struct LlmConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8000 ; empty = not configured
  std::string model = "default";
  std::string api_key;
  double timeout_s = 60.0;
  int max_inflight = 4;

  bool configured() const { return !endpoint.empty(); }

  /// SDM_LLM_ENDPOINT, SDM_LLM_MODEL, SDM_LLM_API_KEY, SDM_LLM_TIMEOUT_S,
  /// SDM_LLM_MAX_INFLIGHT.
  static LlmConfig from_env() {
    LlmConfig c;
    auto get = [](const char* name) -> std::string {
      const char* v = std::getenv(name);
      return v ? std::string(v) : std::string();
    };
    c.endpoint = get("SDM_LLM_ENDPOINT");
    if (auto m = get("SDM_LLM_MODEL"); !m.empty()) c.model = m;
    c.api_key = get("SDM_LLM_API_KEY");
    if (auto t = get("SDM_LLM_TIMEOUT_S"); !t.empty()) c.timeout_s = std::stod(t);
    if (auto n = get("SDM_LLM_MAX_INFLIGHT"); !n.empty()) c.max_inflight = std::stoi(n);
    if (!(c.timeout_s > 0.0)) throw InvalidArgument("SDM_LLM_TIMEOUT_S must be positive");
    if (c.max_inflight < 1) throw InvalidArgument("SDM_LLM_MAX_INFLIGHT must be at least 1");
    return c;
  }
};

/// Returned by LlmClient::chat; `error` is set instead of throwing so the
/// parser can report transport problems as results.
struct ChatReply {
  std::string content;
  std::string error;
  bool timed_out = false;

  bool ok() const { return error.empty(); }
};

class LlmClient {
 public:
  explicit LlmClient(LlmConfig config)
      : config_(std::move(config)), slots_(config_.max_inflight < 1 ? 1 : config_.max_inflight) {
    if (!config_.configured()) throw InvalidArgument("LLM endpoint is not configured (set SDM_LLM_ENDPOINT)");
    endpoint_ = parse_endpoint(config_.endpoint);
  }

  LlmClient(const LlmClient&) = delete;
  LlmClient& operator=(const LlmClient&) = delete;

  const LlmConfig& config() const { return config_; }

  /// One chat-completions round trip; blocks while max_inflight requests
  /// are already outstanding.
  ChatReply chat(const nlohmann::json& messages) const {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};

    ChatReply reply;
    const nlohmann::json body{{"model", config_.model}, {"messages", messages}, {"temperature", 0}};
    httplib::Client client(endpoint_.origin);
    const auto secs = static_cast<time_t>(config_.timeout_s);
    const auto usecs = static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    const auto t0 = std::chrono::steady_clock::now();
    auto res = client.Post(endpoint_.base_path + "/v1/chat/completions", headers, body.dump(), "application/json");
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!res) {
      reply.timed_out = res.error() == httplib::Error::ConnectionTimeout || elapsed >= 0.95 * config_.timeout_s;
      reply.error = (reply.timed_out ? "timed out: " : "transport failure: ") + httplib::to_string(res.error());
      return reply;
    }
    if (res->status < 200 || res->status >= 300) {
      reply.error = "LLM endpoint returned HTTP " + std::to_string(res->status);
      return reply;
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      reply.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      reply.error = "LLM endpoint returned an unexpected body";
    }
    return reply;
  }

 private:
  LlmConfig config_;
  HttpEndpoint endpoint_;
  mutable std::counting_semaphore<> slots_;
};

/// First balanced {...} in `text` that parses as JSON (string-aware brace
/// matching, so prose and code fences around it are ignored).
inline std::optional<std::string> extract_first_json_object(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        std::string candidate(text.substr(start, i - start + 1));
        if (nlohmann::json::accept(candidate)) return candidate;
        break;
      }
    }
  }
  return std::nullopt;
}

/// Prompt, extract, validate; one repair round on a bad reply.
inline ParseResult parse_with_llm(std::string_view text, const LlmClient& client,
                                  std::string_view version = kPromptVersion) {
  ParseResult out;
  out.source = ParseSource::kLlm;
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "user"}, {"content", build_cot_prompt(text, version)}});
  std::vector<std::string> problems;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    const ChatReply reply = client.chat(messages);
    out.attempts = attempt;
    if (!reply.ok()) {
      out.failure = ParseFailure{reply.timed_out ? "timeout" : "transport", reply.error, 0, -1, {}};
      return out;
    }
    if (!out.raw.empty()) out.raw += "\n---\n";
    out.raw += reply.content;
    problems.clear();
    if (auto json_text = extract_first_json_object(reply.content)) {
      auto check = validate_schema(nlohmann::json::parse(*json_text));
      if (check.ok()) {
        out.structured = std::move(check.command);
        return out;
      }
      problems = std::move(check.violations);
    } else {
      problems.push_back("no JSON object found in the reply");
    }
    messages.push_back({{"role", "assistant"}, {"content", reply.content}});
    messages.push_back({{"role", "user"}, {"content", build_repair_prompt(problems)}});
  }
  out.failure = ParseFailure{"schema", "LLM reply failed validation after 2 attempts", 0, -1, problems};
  return out;
}

}  // namespace sdm
