#pragma once

// HTTP/JSON facade over the parser, generator and edit engine.
//
// Service::handle is transport-free (method, path, body) -> (status, body) so
// it can be tested directly; HttpFrontend binds it to an httplib server.

#include <cstdlib>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdm/http.hpp"

#include "sdm/command_parser.hpp"
#include "sdm/edit_engine.hpp"
#include "sdm/generator.hpp"
#include "sdm/mesh_io.hpp"
#include "sdm/synthetic.hpp"

namespace sdm {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string checkpoint;  // empty = generation disabled (409)
  int session_limit = 64;
  std::size_t undo_depth = 20;
  LlmConfig llm;

  /// SDM_HOST, SDM_PORT, SDM_CHECKPOINT, SDM_SESSION_LIMIT plus the SDM_LLM_* variables.
  static ServiceConfig from_env() {
    ServiceConfig c;
    if (const char* v = std::getenv("SDM_HOST"); v && *v) c.host = v;
    if (const char* v = std::getenv("SDM_PORT"); v && *v) c.port = std::stoi(v);
    if (const char* v = std::getenv("SDM_CHECKPOINT"); v) c.checkpoint = v;
    if (const char* v = std::getenv("SDM_SESSION_LIMIT"); v && *v) c.session_limit = std::stoi(v);
    if (c.session_limit < 1) throw InvalidArgument("SDM_SESSION_LIMIT must be at least 1");
    c.llm = LlmConfig::from_env();
    return c;
  }
};

struct HttpReply {
  int status = 200;
  std::string body;
};

class Service {
 public:
  /// Loads cfg.checkpoint unless a generator is supplied.
  explicit Service(ServiceConfig cfg, std::shared_ptr<const FeatureGenerator> generator = nullptr)
      : cfg_(std::move(cfg)), generator_(std::move(generator)), ids_(std::random_device{}()) {
    if (!generator_ && !cfg_.checkpoint.empty()) generator_ = FeatureGenerator::load(cfg_.checkpoint);
    if (cfg_.llm.configured()) llm_ = std::make_unique<LlmClient>(cfg_.llm);
  }

  bool has_checkpoint() const { return generator_ != nullptr; }

  std::size_t session_count() const {
    std::lock_guard lock(sessions_mu_);
    return sessions_.size();
  }

  HttpReply handle(const std::string& method, const std::string& raw_path, const std::string& body) {
    try {
      return route(method, raw_path.substr(0, raw_path.find('?')), body);
    } catch (const std::exception& e) {
      return error(500, "internal_error", e.what());
    }
  }

 private:
  struct UndoEntry {
    MeshModel model;
    std::string mesh_text;
    nlohmann::json summary;
  };

  struct Session {
    std::string id;
    std::mutex mu;  // writer lock for apply/undo; readers copy under it
    MeshModel model;
    std::string mesh_text;
    std::deque<UndoEntry> undo;
  };

  static HttpReply error(int status, const std::string& code, const std::string& message,
                         nlohmann::json detail = nullptr) {
    return {status, nlohmann::json{{"code", code}, {"message", message}, {"detail", detail}}.dump()};
  }

  static HttpReply ok(int status, const nlohmann::json& j) { return {status, j.dump()}; }

  static std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
      while (i < path.size() && path[i] == '/') ++i;
      const std::size_t j = path.find('/', i);
      if (i < path.size()) parts.push_back(path.substr(i, j == std::string::npos ? std::string::npos : j - i));
      i = j == std::string::npos ? path.size() : j;
    }
    return parts;
  }

  HttpReply route(const std::string& method, const std::string& path, const std::string& body) {
    const auto parts = split_path(path);
    auto not_allowed = [&] { return error(405, "method_not_allowed", method + " is not supported on " + path); };
    if (parts.size() == 1 && parts[0] == "health") return method == "GET" ? health() : not_allowed();
    if (parts.empty() || parts[0] != "sessions" || parts.size() > 3)
      return error(404, "not_found", "no endpoint at " + path);
    if (parts.size() == 1) return method == "POST" ? create_session(body) : not_allowed();

    auto session = find(parts[1]);
    if (!session) return error(404, "session_not_found", "unknown session '" + parts[1] + "'");
    if (parts.size() == 2) return method == "DELETE" ? drop_session(parts[1]) : not_allowed();
    const std::string& action = parts[2];
    if (action == "mesh") return method == "GET" ? mesh(*session) : not_allowed();
    if (method != "POST") {
      if (action == "parse" || action == "generate" || action == "apply" || action == "undo") return not_allowed();
      return error(404, "not_found", "no endpoint at " + path);
    }
    if (action == "undo") return undo(*session);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body.empty() ? "{}" : body);
    } catch (const nlohmann::json::parse_error& e) {
      return error(400, "invalid_json", "request body is not valid JSON", e.what());
    }
    if (!j.is_object()) return error(400, "invalid_request", "request body must be a JSON object");
    if (action == "parse") return parse(j);
    if (action == "generate") return generate(*session, j);
    if (action == "apply") return apply(*session, j);
    return error(404, "not_found", "no endpoint at " + path);
  }

  HttpReply health() const {
    return ok(200, {{"status", "ok"},
                    {"checkpoint", has_checkpoint()},
                    {"llm", llm_ != nullptr},
                    {"sessions", session_count()},
                    {"session_limit", cfg_.session_limit}});
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::string new_id() {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(ids_()));
    return buf;
  }

  /// Body: {"model": <SDM-Mesh JSON>} or {"synthetic": {"features": [...], "seed": n}}.
  HttpReply create_session(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      return error(400, "invalid_json", "request body is not valid JSON", e.what());
    }
    auto s = std::make_shared<Session>();
    try {
      if (j.is_object() && j.contains("model")) {
        s->model = model_from_json(j.at("model"));
      } else if (j.is_object() && j.contains("synthetic")) {
        const auto& spec = j.at("synthetic");
        std::vector<std::string> features;
        for (const auto& f : spec.at("features")) {
          auto key = normalize_feature_name(f.get<std::string>());
          if (!key || !feature_type_info(*key))
            throw InvalidArgument("unknown feature type '" + f.get<std::string>() + "'");
          features.push_back(*key);
        }
        if (features.empty()) throw InvalidArgument("synthetic.features must not be empty");
        s->model = generate_model(features, spec.value("seed", std::uint64_t{1}));
      } else {
        return error(400, "invalid_request", "body must contain \"model\" or \"synthetic\"");
      }
    } catch (const Error& e) {
      return error(400, "invalid_model", "model rejected", e.what());
    } catch (const nlohmann::json::exception& e) {
      return error(400, "invalid_model", "model rejected", e.what());
    }
    s->mesh_text = model_to_json_text(s->model);
    {
      std::lock_guard lock(sessions_mu_);
      if (static_cast<int>(sessions_.size()) >= cfg_.session_limit)
        return error(507, "session_limit", "session limit of " + std::to_string(cfg_.session_limit) + " reached");
      do {
        s->id = new_id();
      } while (sessions_.count(s->id));
      sessions_[s->id] = s;
    }
    return {201, "{\"session_id\":\"" + s->id + "\",\"mesh\":" + s->mesh_text + "}"};
  }

  HttpReply drop_session(const std::string& id) {
    std::lock_guard lock(sessions_mu_);
    sessions_.erase(id);
    return {204, ""};
  }

  HttpReply mesh(Session& s) {
    std::lock_guard lock(s.mu);
    return {200, s.mesh_text};
  }

  HttpReply parse(const nlohmann::json& j) {
    if (!j.contains("text") || !j.at("text").is_string()) return error(400, "invalid_request", "\"text\" string is required");
    const std::string text = j.at("text").get<std::string>();
    const std::string engine = j.value("engine", std::string("grammar"));
    ParseResult r;
    if (engine == "grammar") {
      r = parse_with_grammar(text);
    } else if (engine == "llm") {
      if (!llm_) return error(503, "llm_unavailable", "no LLM endpoint configured (set SDM_LLM_ENDPOINT)");
      try {
        r = parse_with_llm(text, *llm_);
      } catch (const InvalidArgument& e) {
        return error(400, "invalid_request", e.what());
      }
    } else {
      return error(400, "invalid_request", "engine must be \"grammar\" or \"llm\"");
    }
    if (!r.ok()) return error(422, "parse_failed", r.failure->reason, r.to_json());
    return ok(200, r.to_json());
  }

  HttpReply generate(Session& s, const nlohmann::json& j) {
    if (!generator_) return error(409, "no_checkpoint", "no trained checkpoint is loaded (set SDM_CHECKPOINT)");
    const auto seed = j.find("seed_face_id");
    if (seed == j.end() || !seed->is_number_integer())
      return error(400, "bad_seed", "\"seed_face_id\" must be an integer face id");
    const auto type = j.find("feature_type");
    if (type == j.end() || !type->is_string())
      return error(400, "unknown_feature_type", "\"feature_type\" string is required", {{"vocabulary", condition_vocabulary_list()}});
    std::string key;
    if (auto norm = normalize_feature_name(type->get<std::string>())) {
      key = *norm;
    } else {
      return error(400, "unknown_feature_type",
                   "unknown feature type '" + type->get<std::string>() + "' (vocabulary: " + vocabulary_hint() + ")",
                   {{"vocabulary", condition_vocabulary_list()}});
    }
    MeshModel model;
    {
      std::lock_guard lock(s.mu);
      model = s.model;
    }
    const int seed_id = seed->get<int>();
    if (!model.has_face(seed_id))
      return error(400, "bad_seed", "seed face " + std::to_string(seed_id) + " is outside 1.." +
                                        std::to_string(model.face_count()));
    auto result = generator_->generate(model, seed_id, key, j.value("distributions", false)).to_json();
    result["seed_face_id"] = seed_id;
    result["feature_type"] = key;
    return ok(200, result);
  }

  /// Body: {"command": StructuredCommand, "face_ids": [ids] | [[ids], ...]}.
  HttpReply apply(Session& s, const nlohmann::json& j) {
    if (!j.contains("command")) return error(400, "invalid_request", "\"command\" is required");
    auto check = validate_schema(j.at("command"));
    if (!check.ok())
      return error(400, "schema_violation", check.violations.front(), {{"violations", check.violations}});
    std::vector<std::vector<int>> face_sets;
    try {
      const auto& ids = j.at("face_ids");
      if (!ids.is_array() || ids.empty()) throw std::invalid_argument("empty");
      if (ids[0].is_array()) {
        face_sets = ids.get<std::vector<std::vector<int>>>();
      } else {
        face_sets.push_back(ids.get<std::vector<int>>());
      }
    } catch (const std::exception&) {
      return error(400, "invalid_request", "\"face_ids\" must be a non-empty list of ids or of id lists");
    }
    std::vector<EditOp> ops;
    try {
      ops = compile_api_calls(*check.command, face_sets);
    } catch (const EditError& e) {
      return error(400, "invalid_request", e.what());
    }
    std::lock_guard lock(s.mu);
    EditResult result;
    try {
      result = apply_ops(s.model, ops);
    } catch (const EditError& e) {
      return error(409, "edit_failed", e.what());
    }
    auto summary = result.summary();
    std::string text = model_to_json_text(result.model);
    s.undo.push_back({std::move(s.model), std::move(s.mesh_text), summary});
    if (s.undo.size() > cfg_.undo_depth) s.undo.pop_front();
    s.model = std::move(result.model);
    s.mesh_text = std::move(text);
    return {200, "{\"summary\":" + summary.dump() + ",\"mesh\":" + s.mesh_text + "}"};
  }

  HttpReply undo(Session& s) {
    std::lock_guard lock(s.mu);
    if (s.undo.empty()) return error(409, "nothing_to_undo", "undo stack is empty");
    auto entry = std::move(s.undo.back());
    s.undo.pop_back();
    s.model = std::move(entry.model);
    s.mesh_text = std::move(entry.mesh_text);
    return {200, "{\"undone\":" + entry.summary.dump() + ",\"mesh\":" + s.mesh_text + "}"};
  }

  ServiceConfig cfg_;
  std::shared_ptr<const FeatureGenerator> generator_;
  std::unique_ptr<LlmClient> llm_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 ids_;  // guarded by sessions_mu_
};

/// httplib binding with permissive CORS for the browser viewer.
class HttpFrontend {
 public:
  explicit HttpFrontend(Service& service) : service_(service) {
    server_.set_payload_max_length(512u << 20);
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                 {"Access-Control-Allow-Headers", "Content-Type"}});
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      const HttpReply r = service_.handle(req.method, req.path, req.body);
      res.status = r.status;
      if (r.status != 204) res.set_content(r.body, "application/json");
    };
    server_.Get(".*", forward);
    server_.Post(".*", forward);
    server_.Delete(".*", forward);
    server_.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }

  /// Port 0 picks a free port; returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  bool listen() { return server_.listen_after_bind(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  void stop() { server_.stop(); }

 private:
  Service& service_;
  httplib::Server server_;
};

}  // namespace sdm
