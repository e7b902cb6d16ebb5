#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdm/encoder.hpp"
#include "sdm/error.hpp"
#include "sdm/feature_types.hpp"
#include "sdm/generator.hpp"
#include "sdm/mesh.hpp"
#include "sdm/nn/tensor.hpp"

namespace sdm {

// ---------------------------------------------------------------------------
// Labels.

/// [SOS, y1..y_{M-1}, EOS, 0...] of fixed length; valid_length counts the
/// predicted positions through EOS (= M, the feature size).
struct LabelSequence {
  std::vector<int> tokens;
  int valid_length = 0;
  std::string feature_type;

  std::vector<int> decoder_inputs() const { return {tokens.begin(), tokens.begin() + valid_length}; }
  std::vector<int> targets() const { return {tokens.begin() + 1, tokens.begin() + 1 + valid_length}; }
};

/// SOS is a random member when `rng` is given, otherwise the lowest id;
/// the rest follow in ascending order. `length` >= |faces| + 1.
inline LabelSequence build_labels(const std::vector<int>& faces, int length, std::mt19937_64* rng,
                                  const std::string& feature_type = {}) {
  if (faces.empty()) throw InvalidArgument("feature face set is empty");
  std::vector<int> sorted = faces;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw InvalidArgument("duplicate face id in feature");
  if (sorted.front() < 1) throw InvalidArgument("face ids start at 1");
  if (length < static_cast<int>(sorted.size()) + 1)
    throw InvalidArgument("label length " + std::to_string(length) + " cannot hold " + std::to_string(sorted.size()) +
                          " faces and EOS");
  std::size_t pick = 0;
  if (rng) pick = std::uniform_int_distribution<std::size_t>(0, sorted.size() - 1)(*rng);
  LabelSequence seq;
  seq.feature_type = feature_type;
  seq.tokens.assign(static_cast<std::size_t>(length), 0);
  seq.tokens[0] = sorted[pick];
  std::size_t at = 1;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (i != pick) seq.tokens[at++] = sorted[i];
  seq.tokens[at] = kEosId;
  seq.valid_length = static_cast<int>(sorted.size());
  return seq;
}

// ---------------------------------------------------------------------------
// Loss.

/// Per-position weights: 1 on valid positions, alpha on the EOS position
/// (the last valid one), 0 beyond.
inline nn::Matrix position_weights(const std::vector<int>& targets, int valid, Eigen::Index rows, Eigen::Index cols,
                                   double alpha) {
  if (valid < 1 || valid > rows || static_cast<std::size_t>(valid) > targets.size())
    throw InvalidArgument("valid length out of range");
  if (targets[static_cast<std::size_t>(valid - 1)] != kEosId) throw InvalidArgument("last valid target must be EOS");
  nn::Matrix w = nn::Matrix::Zero(rows, cols);
  for (int j = 0; j < valid; ++j) w.row(j).setConstant(j == valid - 1 ? alpha : 1.0);
  return w;
}

inline nn::Matrix one_hot_targets(const std::vector<int>& targets, Eigen::Index rows, Eigen::Index cols) {
  nn::Matrix y = nn::Matrix::Zero(rows, cols);
  for (Eigen::Index j = 0; j < rows && j < static_cast<Eigen::Index>(targets.size()); ++j) {
    const int t = targets[static_cast<std::size_t>(j)];
    if (t < 0 || t >= cols) throw InvalidArgument("target id out of range");
    y(j, t) = 1.0;
  }
  return y;
}

/// Masked, EOS-weighted BCE over one-hot pointer targets:
///   -1/sum(M_i) * sum_i sum_j M_ij w_ij sum_k [y log p + (1-y) log(1-p)]
/// probs[i] is (rows >= valid[i]) x (N_i + 1); targets[i][j] is the
/// candidate index expected at position j.
inline nn::Var masked_weighted_bce(const std::vector<nn::Var>& probs, const std::vector<std::vector<int>>& targets,
                                   const std::vector<int>& valid, double alpha) {
  if (probs.empty() || probs.size() != targets.size() || probs.size() != valid.size())
    throw InvalidArgument("loss inputs must have one entry per sample");
  if (!(alpha >= 1.0)) throw InvalidArgument("alpha must be >= 1");
  std::vector<nn::Var> terms;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto r = probs[i].rows(), c = probs[i].cols();
    terms.push_back(nn::weighted_bce_sum(probs[i], one_hot_targets(targets[i], r, c),
                                         position_weights(targets[i], valid[i], r, c, alpha)));
    total += valid[i];
  }
  nn::Var sum = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) sum = nn::add(sum, terms[i]);
  return nn::scale(sum, -1.0 / total);
}

/// Unmasked, unweighted BCE averaged over B * L positions.
inline double standard_bce(const std::vector<nn::Matrix>& probs, const std::vector<std::vector<int>>& targets) {
  double s = 0.0;
  Eigen::Index positions = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto& p = probs[i];
    const nn::Matrix y = one_hot_targets(targets[i], p.rows(), p.cols());
    const nn::Matrix w = nn::Matrix::Ones(p.rows(), p.cols());
    s += nn::weighted_bce_sum(nn::constant(p), y, w).item();
    positions += p.rows();
  }
  return s * (-1.0 / static_cast<double>(positions));
}

// ---------------------------------------------------------------------------
// Metrics.

inline double set_iou(const std::vector<int>& predicted, const std::vector<int>& truth) {
  const std::set<int> a(predicted.begin(), predicted.end()), b(truth.begin(), truth.end());
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (int x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline bool set_equal(const std::vector<int>& predicted, const std::vector<int>& truth) {
  return std::set<int>(predicted.begin(), predicted.end()) == std::set<int>(truth.begin(), truth.end());
}

struct TypeMetrics {
  int count = 0;
  double iou_mean = 0.0;
  double em_rate = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_iou = 0.0;
  double val_em = 0.0;
  double val_eos_accuracy = 0.0;
  double seconds = 0.0;
};

struct MetricsReport {
  int count = 0;
  double iou_mean = 0.0;
  double em_rate = 0.0;
  double ordered_match_rate = 0.0;
  double eos_length_accuracy = 0.0;
  std::map<std::string, TypeMetrics> per_type;
  std::vector<EpochRecord> loss_curve;

  nlohmann::json to_json() const {
    nlohmann::json types = nlohmann::json::object();
    for (const auto& [k, m] : per_type) types[k] = {{"count", m.count}, {"iou_mean", m.iou_mean}, {"em_rate", m.em_rate}};
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& e : loss_curve)
      curve.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"val_iou", e.val_iou},
                       {"val_em", e.val_em},
                       {"val_eos_accuracy", e.val_eos_accuracy},
                       {"seconds", e.seconds}});
    return {{"count", count},
            {"iou_mean", iou_mean},
            {"em_rate", em_rate},
            {"ordered_match_rate", ordered_match_rate},
            {"eos_length_accuracy", eos_length_accuracy},
            {"per_type", types},
            {"loss_curve", curve}};
  }
};

// ---------------------------------------------------------------------------
// Data.

struct FeatureSample {
  int model = 0;  // index into PreparedDataset::models
  std::string feature_type;
  std::vector<int> faces;  // sorted
};

struct PreparedModel {
  std::string model_id;
  MeshModel model;  // normalized
  EncoderInputs inputs;
};

struct PreparedDataset {
  std::vector<PreparedModel> models;
  std::vector<FeatureSample> samples;
  int max_feature_size = 0;
};

inline PreparedDataset prepare_dataset(const std::vector<MeshModel>& models) {
  PreparedDataset out;
  for (const auto& m : models) {
    PreparedModel pm;
    pm.model_id = m.model_id;
    pm.model = normalize_model(m);
    pm.inputs = prepare_encoder_inputs(pm.model);
    const int idx = static_cast<int>(out.models.size());
    for (const auto& label : pm.model.labels) {
      FeatureSample s{idx, label.type, label.face_ids};
      std::sort(s.faces.begin(), s.faces.end());
      out.max_feature_size = std::max(out.max_feature_size, static_cast<int>(s.faces.size()));
      out.samples.push_back(std::move(s));
    }
    out.models.push_back(std::move(pm));
  }
  return out;
}

struct DatasetSplit {
  std::vector<MeshModel> train, val, test;
};

/// 80/10/10 split by model, stratified by each model's first feature type.
inline DatasetSplit split_dataset(const std::vector<MeshModel>& models, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < models.size(); ++i)
    by_type[models[i].labels.empty() ? std::string() : models[i].labels.front().type].push_back(i);
  std::mt19937_64 rng(seed);
  DatasetSplit out;
  for (auto& [_, idx] : by_type) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n = idx.size();
    const std::size_t n_val = (n + 5) / 10, n_test = (n + 5) / 10;  // rounded, so small strata still contribute
    for (std::size_t k = 0; k < n; ++k) {
      auto& dst = k < n_val ? out.val : (k < n_val + n_test ? out.test : out.train);
      dst.push_back(models[idx[k]]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training and evaluation.

struct TrainConfig {
  int batch_size = 16;
  int epochs = 100;
  double learning_rate = 1e-4;
  double alpha = 5.0;
  std::uint64_t seed = 0;
  int patience = 10;
  double clip_norm = 1.0;
  /// Probability of conditioning on the family name ("slot", "hole")
  /// instead of the specific type, for types that have a family entry.
  double family_condition_rate = 0.25;
  /// Evaluate on the validation split every this many epochs.
  int eval_every = 1;
  /// Stop once validation EM reaches this rate; 0 disables.
  double stop_at_em = 0.0;

  void validate() const {
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (!(alpha >= 1.0)) throw InvalidArgument("alpha must be >= 1");
    if (epochs < 0 || patience < 1 || eval_every < 1) throw InvalidArgument("epochs/patience/eval_every out of range");
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, batch_size, epochs, learning_rate, alpha, seed, patience,
                                                clip_norm, family_condition_rate, eval_every, stop_at_em)

/// Runs evaluation with SOS = lowest face id and condition = feature type.
inline MetricsReport evaluate(const FeatureGenerator& gen, const PreparedDataset& data) {
  MetricsReport r;
  std::map<std::string, std::pair<double, double>> sums;
  for (const auto& s : data.samples) {
    const auto& pm = data.models[static_cast<std::size_t>(s.model)];
    const auto res = gen.generate(pm.inputs, s.faces.front(), s.feature_type);
    const double iou = set_iou(res.face_ids, s.faces);
    const bool em = set_equal(res.face_ids, s.faces);
    std::vector<int> emitted(res.raw_sequence.begin(), res.raw_sequence.end());
    if (!emitted.empty() && emitted.back() == kEosId) emitted.pop_back();
    r.iou_mean += iou;
    r.em_rate += em ? 1.0 : 0.0;
    r.ordered_match_rate += emitted == s.faces ? 1.0 : 0.0;
    r.eos_length_accuracy += res.face_ids.size() == s.faces.size() ? 1.0 : 0.0;
    auto& t = r.per_type[s.feature_type];
    ++t.count;
    t.iou_mean += iou;
    t.em_rate += em ? 1.0 : 0.0;
    ++r.count;
  }
  if (r.count > 0) {
    const double n = r.count;
    r.iou_mean /= n;
    r.em_rate /= n;
    r.ordered_match_rate /= n;
    r.eos_length_accuracy /= n;
  }
  for (auto& [_, t] : r.per_type) {
    t.iou_mean /= t.count;
    t.em_rate /= t.count;
  }
  return r;
}

/// Condition string used for a training sample.
inline std::string training_condition(const std::string& type, double family_rate, std::mt19937_64& rng) {
  const auto info = feature_type_info(type);
  if (family_rate > 0.0 && info && condition_index(info->family) >= 0 &&
      std::uniform_real_distribution<double>(0.0, 1.0)(rng) < family_rate)
    return std::string(info->family);
  return type;
}

struct TrainResult {
  MetricsReport report;  // best validation metrics plus the full loss curve
  int best_epoch = 0;
  int epochs_run = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Teacher-forced training. With a non-empty validation set the weights
/// with the best validation IoU are kept and training stops after
/// `patience` evaluations without improvement.
inline TrainResult train(FeatureGenerator& gen, const PreparedDataset& train_set, const PreparedDataset& val_set,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.samples.empty()) throw InvalidArgument("training set has no labeled features");
  std::mt19937_64 rng(cfg.seed);
  nn::Adam opt({.lr = cfg.learning_rate, .clip_norm = cfg.clip_norm});
  auto& ps = gen.parameters();
  const int length = train_set.max_feature_size + 1;

  TrainResult result;
  double best_iou = -1.0, best_em = -1.0;
  std::map<std::string, nn::Matrix> best_values = ps.values();
  int since_best = 0;

  std::vector<std::size_t> order(train_set.samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      ps.zero_grad();
      std::map<int, nn::Var> encoded;
      std::vector<nn::Var> probs;
      std::vector<std::vector<int>> targets;
      std::vector<int> valid;
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = train_set.samples[order[k]];
        auto it = encoded.find(s.model);
        if (it == encoded.end())
          it = encoded.emplace(s.model, gen.encode(train_set.models[static_cast<std::size_t>(s.model)].inputs, &rng)).first;
        const nn::Var& e_f = it->second;
        const auto labels = build_labels(s.faces, length, &rng, s.feature_type);
        const std::string cond = training_condition(s.feature_type, cfg.family_condition_rate, rng);
        const nn::Var table = gen.candidates(e_f, gen.fuse(gen.text_embedding(cond), e_f));
        probs.push_back(gen.sequence_probabilities(table, labels.decoder_inputs(), &rng));
        targets.push_back(labels.targets());
        valid.push_back(labels.valid_length);
      }
      const nn::Var loss = masked_weighted_bce(probs, targets, valid, cfg.alpha);
      if (!std::isfinite(loss.item()))
        throw Error("training diverged at epoch " + std::to_string(epoch) + ": loss is " + std::to_string(loss.item()));
      nn::backward(loss);
      opt.step(ps);
      loss_sum += loss.item();
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / batches;
    const bool eval_now = !val_set.samples.empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
    bool stop = false;
    if (eval_now) {
      const auto m = evaluate(gen, val_set);
      rec.val_iou = m.iou_mean;
      rec.val_em = m.em_rate;
      rec.val_eos_accuracy = m.eos_length_accuracy;
      if (m.iou_mean > best_iou + 1e-12 || (m.iou_mean >= best_iou - 1e-12 && m.em_rate > best_em + 1e-12)) {
        best_iou = m.iou_mean;
        best_em = m.em_rate;
        best_values = ps.values();
        result.best_epoch = epoch;
        auto curve = std::move(result.report.loss_curve);
        result.report = m;
        result.report.loss_curve = std::move(curve);
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        stop = true;
      }
      if (cfg.stop_at_em > 0.0 && m.em_rate >= cfg.stop_at_em) stop = true;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.report.loss_curve.push_back(rec);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(rec);
    if (stop) break;
  }
  if (!val_set.samples.empty()) {
    ps.load_values(best_values);
  } else {
    result.best_epoch = result.epochs_run;
  }
  return result;
}

}  // namespace sdm
