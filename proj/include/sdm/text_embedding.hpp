#pragma once

// Condition-text embeddings (256-dim). The local provider is a trainable
// lookup table over the condition vocabulary; the remote provider calls an
// OpenAI-compatible /v1/embeddings endpoint.

#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "sdm/error.hpp"
#include "sdm/feature_types.hpp"
#include "sdm/http.hpp"
#include "sdm/nn/layers.hpp"

namespace sdm {

inline constexpr int kTextDim = 256;

class TextProvider {
 public:
  virtual ~TextProvider() = default;
  /// 1 x 256 embedding of a feature-type string.
  virtual nn::Var embed(const std::string& feature_type) = 0;
  virtual std::string kind() const = 0;
};

inline std::string vocabulary_hint() {
  std::string s;
  for (auto v : kConditionVocabulary) {
    if (!s.empty()) s += ", ";
    s += v;
  }
  return s;
}

/// Resolves a free-form name to its condition-vocabulary index.
inline int resolve_condition(const std::string& feature_type) {
  if (feature_type.empty()) throw InvalidArgument("feature type must not be empty");
  const auto key = normalize_feature_name(feature_type);
  const int idx = key ? condition_index(*key) : -1;
  if (idx < 0) throw InvalidArgument("unknown feature type '" + feature_type + "' (vocabulary: " + vocabulary_hint() + ")");
  return idx;
}

class LocalTextProvider : public TextProvider {
 public:
  LocalTextProvider(nn::ParameterStore& ps, std::mt19937_64& rng)
      : table_(ps.add("text.table", nn::normal_init(static_cast<Eigen::Index>(kConditionVocabulary.size()), kTextDim,
                                                    1.0, rng))) {}

  nn::Var embed(const std::string& feature_type) override {
    return nn::gather_rows(table_, {resolve_condition(feature_type)});
  }
  std::string kind() const override { return "local"; }

 private:
  nn::Var table_;
};

struct RemoteEmbeddingConfig {
  std::string endpoint;
  std::string model;
  std::string api_key;
  double timeout_s = 30.0;

  /// SDM_EMBED_ENDPOINT, SDM_EMBED_MODEL, SDM_EMBED_API_KEY, SDM_EMBED_TIMEOUT_S.
  static RemoteEmbeddingConfig from_env() {
    auto get = [](const char* k) {
      const char* v = std::getenv(k);
      return v ? std::string(v) : std::string();
    };
    RemoteEmbeddingConfig c;
    c.endpoint = get("SDM_EMBED_ENDPOINT");
    c.model = get("SDM_EMBED_MODEL");
    c.api_key = get("SDM_EMBED_API_KEY");
    if (auto t = get("SDM_EMBED_TIMEOUT_S"); !t.empty()) c.timeout_s = std::stod(t);
    return c;
  }
};

class RemoteTextProvider : public TextProvider {
 public:
  explicit RemoteTextProvider(RemoteEmbeddingConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ProviderError("remote text provider needs SDM_EMBED_ENDPOINT");
    endpoint_ = parse_endpoint(config_.endpoint);
  }

  nn::Var embed(const std::string& feature_type) override {
    if (feature_type.empty()) throw InvalidArgument("feature type must not be empty");
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(feature_type); it != cache_.end()) return nn::constant(it->second);
    }
    const nlohmann::json body{{"model", config_.model}, {"input", feature_type}, {"dimensions", kTextDim}};
    const auto res = post_json(endpoint_, "/v1/embeddings", body, config_.api_key, config_.timeout_s);
    nn::Matrix row(1, kTextDim);
    try {
      const auto& e = res.at("data").at(0).at("embedding");
      if (e.size() != static_cast<std::size_t>(kTextDim))
        throw ProviderError("embedding has " + std::to_string(e.size()) + " dimensions, expected 256");
      for (int i = 0; i < kTextDim; ++i) row(0, i) = e.at(static_cast<std::size_t>(i)).get<double>();
    } catch (const nlohmann::json::exception& ex) {
      throw ProviderError(std::string("malformed embeddings response: ") + ex.what());
    }
    std::lock_guard lock(mu_);
    cache_.emplace(feature_type, row);
    return nn::constant(row);
  }
  std::string kind() const override { return "remote"; }

 private:
  RemoteEmbeddingConfig config_;
  HttpEndpoint endpoint_;
  std::mutex mu_;
  std::map<std::string, nn::Matrix> cache_;
};

}  // namespace sdm
