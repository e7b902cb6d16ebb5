#pragma once

// Text-conditioned face-set generation.
//
//   E_fusion = MHA(q = adapt(E_S), kv = E_F)                   1 x d
//   table    = [eos; LN(E_F)] + E_fusion (broadcast)           (N+1) x d, row j = candidate j
//   h        = decoder(table[SOS, y1, ...], memory = table)    causal, pre-norm
//   u(t, j)  = v . tanh(W1 table_j + W2 h_t)
//   P(t, .)  = softmax over candidates not yet emitted (EOS always allowed)

#include <algorithm>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdm/encoder.hpp"
#include "sdm/error.hpp"
#include "sdm/mesh.hpp"
#include "sdm/nn/checkpoint.hpp"
#include "sdm/nn/layers.hpp"
#include "sdm/text_embedding.hpp"

namespace sdm {

inline constexpr int kEosId = 0;

struct NetworkConfig {
  EncoderConfig encoder;
  int decoder_layers = 3;
  std::string text_provider = "local";  // "local" | "remote"
  std::uint64_t seed = 0;

  void validate() const {
    encoder.validate();
    if (decoder_layers < 1) throw InvalidArgument("decoder_layers must be >= 1");
    if (text_provider != "local" && text_provider != "remote")
      throw InvalidArgument("text_provider must be 'local' or 'remote'");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NetworkConfig, encoder, decoder_layers, text_provider, seed)

struct DecoderState {
  std::vector<int> generated_ids;  // starts with SOS
  std::vector<bool> selectable;    // per candidate, index 0 = EOS
  int step = 0;

  static DecoderState start(int seed_face, int faces) {
    DecoderState s;
    s.generated_ids = {seed_face};
    s.selectable.assign(static_cast<std::size_t>(faces) + 1, true);
    s.selectable[static_cast<std::size_t>(seed_face)] = false;
    return s;
  }
};

struct GenerationResult {
  std::vector<int> face_ids;      // sorted, SOS included, EOS excluded
  std::vector<int> raw_sequence;  // SOS, generated ids, EOS (unless capped)
  std::vector<std::vector<double>> per_step_distributions;

  nlohmann::json to_json() const {
    nlohmann::json j{{"face_ids", face_ids}, {"raw_sequence", raw_sequence}};
    if (!per_step_distributions.empty()) j["per_step_distributions"] = per_step_distributions;
    return j;
  }
};

/// Argmax; ties go to the lowest index.
inline int select_next(const std::vector<double>& distribution) {
  if (distribution.empty()) throw InvalidArgument("empty distribution");
  return static_cast<int>(std::max_element(distribution.begin(), distribution.end()) - distribution.begin());
}

class FeatureGenerator {
 public:
  explicit FeatureGenerator(const NetworkConfig& cfg, std::unique_ptr<TextProvider> remote = nullptr) : cfg_(cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const int d = cfg.encoder.d_model;
    encoder_ = GeometryEncoder(ps_, cfg.encoder, rng);
    if (cfg.text_provider == "local") {
      text_ = std::make_unique<LocalTextProvider>(ps_, rng);
    } else {
      text_ = remote ? std::move(remote) : std::make_unique<RemoteTextProvider>(RemoteEmbeddingConfig::from_env());
    }
    if (d != kTextDim) adapter_ = nn::Linear::create(ps_, "gen.adapter", kTextDim, d, rng, false);
    fusion_ = nn::MultiHeadAttention::create(ps_, "gen.fusion", d, cfg.encoder.heads, rng, false);
    eos_ = ps_.add("gen.eos", nn::normal_init(1, d, 1.0, rng));
    cand_ln_ = nn::LayerNorm::create(ps_, "gen.cand_ln", d);
    for (int i = 0; i < cfg.decoder_layers; ++i)
      decoder_.push_back(nn::DecoderLayer::create(ps_, "gen.dec" + std::to_string(i), d, cfg.encoder.heads,
                                                  cfg.encoder.feed_forward_dim, rng));
    final_ln_ = nn::LayerNorm::create(ps_, "gen.final_ln", d);
    w1_ = ps_.add("gen.ptr.w1", nn::xavier_uniform(d, d, rng));
    w2_ = ps_.add("gen.ptr.w2", nn::xavier_uniform(d, d, rng));
    v_ = ps_.add("gen.ptr.v", nn::xavier_uniform(1, d, rng));
  }

  FeatureGenerator(const FeatureGenerator&) = delete;
  FeatureGenerator& operator=(const FeatureGenerator&) = delete;

  nn::ParameterStore& parameters() { return ps_; }
  const nn::ParameterStore& parameters() const { return ps_; }
  const NetworkConfig& config() const { return cfg_; }
  const GeometryEncoder& encoder() const { return encoder_; }
  TextProvider& text_provider() { return *text_; }

  nn::Var text_embedding(const std::string& feature_type) const { return text_->embed(feature_type); }

  nn::Var encode(const EncoderInputs& in, std::mt19937_64* rng = nullptr) const { return encoder_.encode(in, rng); }

  /// Cross-attention of the (adapted) text embedding over face embeddings.
  nn::Var fuse(const nn::Var& e_s, const nn::Var& e_f) const {
    if (e_s.cols() != kTextDim || e_s.rows() != 1) throw ShapeError("text embedding must be 1 x 256");
    if (e_f.cols() != cfg_.encoder.d_model) throw ShapeError("face embeddings have the wrong width");
    const nn::Var q = adapter_.w.defined() ? adapter_(e_s) : e_s;
    return fusion_(q, e_f, false);
  }

  nn::Var candidates(const nn::Var& e_f, const nn::Var& fusion) const {
    return nn::add_row(nn::concat_rows({eos_, cand_ln_(e_f)}), fusion);
  }

  /// Decoder hidden states for the given input ids (one row per input).
  nn::Var decode(const nn::Var& table, const std::vector<int>& inputs, std::mt19937_64* rng = nullptr) const {
    nn::Var x = nn::gather_rows(table, inputs);
    for (const auto& layer : decoder_) x = layer(x, table, cfg_.encoder.dropout, rng);
    return final_ln_(x);
  }

  nn::Var pointer_logits(const nn::Var& table, const nn::Var& h) const {
    return nn::additive_scores(nn::matmul(table, w1_), nn::matmul(h, w2_), v_);
  }

  /// Row t forbids every id in inputs[0..t]; EOS stays selectable.
  static nn::Matrix selectable_mask(const std::vector<int>& inputs, Eigen::Index candidates) {
    nn::Matrix m = nn::Matrix::Ones(static_cast<Eigen::Index>(inputs.size()), candidates);
    for (std::size_t t = 0; t < inputs.size(); ++t)
      for (std::size_t k = 0; k <= t; ++k)
        if (inputs[k] != kEosId) m(static_cast<Eigen::Index>(t), inputs[k]) = 0.0;
    return m;
  }

  /// One-pass teacher-forced distributions, T x (N+1).
  nn::Var sequence_probabilities(const nn::Var& table, const std::vector<int>& inputs,
                                 std::mt19937_64* rng = nullptr) const {
    const nn::Matrix mask = selectable_mask(inputs, table.rows());
    return nn::softmax_rows(pointer_logits(table, decode(table, inputs, rng)), &mask);
  }

  /// Distribution over the N+1 candidates for the next id.
  std::vector<double> decode_step(const DecoderState& state, const nn::Var& table) const {
    if (static_cast<Eigen::Index>(state.selectable.size()) != table.rows())
      throw ShapeError("decoder state does not match the candidate table");
    if (!state.selectable[kEosId]) throw InvalidArgument("EOS must stay selectable");
    nn::NoGradGuard guard;
    const nn::Var h = decode(table, state.generated_ids);
    const nn::Var last = nn::slice_rows(h, h.rows() - 1, 1);
    nn::Matrix mask(1, table.rows());
    for (Eigen::Index j = 0; j < table.rows(); ++j) mask(0, j) = state.selectable[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    const nn::Var p = nn::softmax_rows(pointer_logits(table, last), &mask);
    return {p.value().data(), p.value().data() + p.value().size()};
  }

  GenerationResult generate(const EncoderInputs& in, int seed_face, const std::string& feature_type,
                            bool keep_distributions = false) const {
    if (seed_face < 1 || seed_face > in.faces)
      throw InvalidArgument("seed face " + std::to_string(seed_face) + " is outside 1.." + std::to_string(in.faces));
    nn::NoGradGuard guard;
    const nn::Var e_s = text_embedding(feature_type);
    const nn::Var e_f = encode(in);
    const nn::Var table = candidates(e_f, fuse(e_s, e_f));
    return run_decoder(table, seed_face, in.faces, keep_distributions);
  }

  GenerationResult generate(const MeshModel& model, int seed_face, const std::string& feature_type,
                            bool keep_distributions = false) const {
    return generate(prepare_encoder_inputs(normalize_model(model)), seed_face, feature_type, keep_distributions);
  }

  /// Greedy masked decoding from a precomputed candidate table. Stops at
  /// EOS or once every face has been emitted.
  GenerationResult run_decoder(const nn::Var& table, int seed_face, int faces, bool keep_distributions) const {
    DecoderState state = DecoderState::start(seed_face, faces);
    GenerationResult out;
    out.raw_sequence.push_back(seed_face);
    while (static_cast<int>(state.generated_ids.size()) < faces) {
      const auto dist = decode_step(state, table);
      const int next = select_next(dist);
      if (keep_distributions) out.per_step_distributions.push_back(dist);
      out.raw_sequence.push_back(next);
      ++state.step;
      if (next == kEosId) break;
      state.generated_ids.push_back(next);
      state.selectable[static_cast<std::size_t>(next)] = false;
    }
    out.face_ids = state.generated_ids;
    std::sort(out.face_ids.begin(), out.face_ids.end());
    return out;
  }

  void save(const std::filesystem::path& path, const nlohmann::json& extra = nlohmann::json::object()) const {
    nlohmann::json config{{"network", cfg_}};
    for (auto it = extra.begin(); it != extra.end(); ++it) config[it.key()] = it.value();
    nn::save_checkpoint(path, config, ps_.values());
  }

  static std::unique_ptr<FeatureGenerator> load(const std::filesystem::path& path,
                                                std::unique_ptr<TextProvider> remote = nullptr) {
    auto data = nn::load_checkpoint(path);
    NetworkConfig cfg;
    try {
      cfg = data.config.at("network").get<NetworkConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": bad network config: " + e.what());
    }
    auto gen = std::make_unique<FeatureGenerator>(cfg, std::move(remote));
    gen->ps_.load_values(data.tensors);
    return gen;
  }

 private:
  NetworkConfig cfg_;
  nn::ParameterStore ps_;
  GeometryEncoder encoder_;
  std::unique_ptr<TextProvider> text_;
  nn::Linear adapter_;
  nn::MultiHeadAttention fusion_;
  nn::Var eos_;
  nn::LayerNorm cand_ln_;
  std::vector<nn::DecoderLayer> decoder_;
  nn::LayerNorm final_ln_;
  nn::Var w1_, w2_, v_;
};

}  // namespace sdm
