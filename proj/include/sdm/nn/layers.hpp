#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sdm/nn/tensor.hpp"

namespace sdm::nn {

/// Named trainable arrays in creation order. Layers keep Var handles into the
/// store, so loading values in place updates every layer that uses them.
class ParameterStore {
 public:
  Var add(const std::string& name, Matrix init) {
    if (params_.count(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
    order_.push_back(name);
    return params_.emplace(name, parameter(std::move(init))).first->second;
  }

  const Var& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
    return it->second;
  }
  Var& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : params_) n += static_cast<std::size_t>(v.value().size());
    return n;
  }

  void zero_grad() {
    for (auto& [_, v] : params_) v.mutable_grad().resize(0, 0);
  }

  double grad_norm() const {
    double s = 0.0;
    for (const auto& [_, v] : params_)
      if (v.grad().size() != 0) s += v.grad().squaredNorm();
    return std::sqrt(s);
  }

  /// Replaces every value; names and shapes must match exactly.
  void load_values(const std::map<std::string, Matrix>& values) {
    for (const auto& name : order_) {
      auto it = values.find(name);
      if (it == values.end()) throw ShapeError("checkpoint is missing parameter '" + name + "'");
      Var& p = params_.at(name);
      if (it->second.rows() != p.rows() || it->second.cols() != p.cols())
        throw ShapeError("parameter '" + name + "' has shape " + std::to_string(it->second.rows()) + "x" +
                         std::to_string(it->second.cols()) + ", expected " + std::to_string(p.rows()) + "x" +
                         std::to_string(p.cols()));
      p.mutable_value() = it->second;
    }
    for (const auto& [name, _] : values)
      if (!params_.count(name)) throw ShapeError("checkpoint has unexpected parameter '" + name + "'");
  }

  std::map<std::string, Matrix> values() const {
    std::map<std::string, Matrix> out;
    for (const auto& [name, v] : params_) out.emplace(name, v.value());
    return out;
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, Var> params_;
};

inline Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Matrix normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

struct Linear {
  Var w;  // in x out
  Var b;  // 1 x out, undefined when bias-free

  static Linear create(ParameterStore& ps, const std::string& name, int in, int out, std::mt19937_64& rng,
                       bool bias = true) {
    Linear l;
    l.w = ps.add(name + ".w", xavier_uniform(in, out, rng));
    if (bias) l.b = ps.add(name + ".b", Matrix::Zero(1, out));
    return l;
  }
  Var operator()(const Var& x) const {
    Var y = matmul(x, w);
    return b.defined() ? add_row(y, b) : y;
  }
};

struct LayerNorm {
  Var gamma, beta;

  static LayerNorm create(ParameterStore& ps, const std::string& name, int d) {
    return {ps.add(name + ".gamma", Matrix::Ones(1, d)), ps.add(name + ".beta", Matrix::Zero(1, d))};
  }
  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
};

/// Two-layer perceptron with ReLU between (and optionally after) the layers.
struct Mlp {
  Linear l1, l2;
  bool relu_out = false;

  static Mlp create(ParameterStore& ps, const std::string& name, int in, int hidden, int out, std::mt19937_64& rng,
                    bool relu_out = false) {
    return {Linear::create(ps, name + ".0", in, hidden, rng), Linear::create(ps, name + ".1", hidden, out, rng),
            relu_out};
  }
  Var operator()(const Var& x) const {
    Var y = l2(relu(l1(x)));
    return relu_out ? relu(y) : y;
  }
};

/// Multi-head attention with bias-free projections; the output projection is
/// optional (the text/geometry fusion uses none).
struct MultiHeadAttention {
  Var wq, wk, wv, wo;
  int heads = 1;

  static MultiHeadAttention create(ParameterStore& ps, const std::string& name, int d, int heads,
                                   std::mt19937_64& rng, bool output_projection = true) {
    MultiHeadAttention m;
    m.wq = ps.add(name + ".wq", xavier_uniform(d, d, rng));
    m.wk = ps.add(name + ".wk", xavier_uniform(d, d, rng));
    m.wv = ps.add(name + ".wv", xavier_uniform(d, d, rng));
    if (output_projection) m.wo = ps.add(name + ".wo", xavier_uniform(d, d, rng));
    m.heads = heads;
    return m;
  }
  Var operator()(const Var& query, const Var& memory, bool causal) const {
    Var out = attention(matmul(query, wq), matmul(memory, wk), matmul(memory, wv), heads, causal);
    return wo.defined() ? matmul(out, wo) : out;
  }
};

struct FeedForward {
  Linear l1, l2;

  static FeedForward create(ParameterStore& ps, const std::string& name, int d, int ff, std::mt19937_64& rng) {
    return {Linear::create(ps, name + ".0", d, ff, rng), Linear::create(ps, name + ".1", ff, d, rng)};
  }
  Var operator()(const Var& x) const { return l2(relu(l1(x))); }
};

/// Pre-norm encoder block: x + Attn(LN(x)), then x + FF(LN(x)).
struct EncoderLayer {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ff;

  static EncoderLayer create(ParameterStore& ps, const std::string& name, int d, int heads, int ff_dim,
                             std::mt19937_64& rng) {
    return {LayerNorm::create(ps, name + ".ln1", d), LayerNorm::create(ps, name + ".ln2", d),
            MultiHeadAttention::create(ps, name + ".attn", d, heads, rng),
            FeedForward::create(ps, name + ".ff", d, ff_dim, rng)};
  }
  Var operator()(const Var& x, double p, std::mt19937_64* rng) const {
    Var n1 = ln1(x);
    Var h = add(x, dropout(attn(n1, n1, false), p, rng));
    return add(h, dropout(ff(ln2(h)), p, rng));
  }
};

/// Pre-norm decoder block: causal self-attention, cross-attention, feed-forward.
struct DecoderLayer {
  LayerNorm ln1, ln2, ln3;
  MultiHeadAttention self_attn, cross_attn;
  FeedForward ff;

  static DecoderLayer create(ParameterStore& ps, const std::string& name, int d, int heads, int ff_dim,
                             std::mt19937_64& rng) {
    return {LayerNorm::create(ps, name + ".ln1", d),
            LayerNorm::create(ps, name + ".ln2", d),
            LayerNorm::create(ps, name + ".ln3", d),
            MultiHeadAttention::create(ps, name + ".self", d, heads, rng),
            MultiHeadAttention::create(ps, name + ".cross", d, heads, rng),
            FeedForward::create(ps, name + ".ff", d, ff_dim, rng)};
  }
  Var operator()(const Var& x, const Var& memory, double p, std::mt19937_64* rng) const {
    Var n1 = ln1(x);
    Var h = add(x, dropout(self_attn(n1, n1, true), p, rng));
    h = add(h, dropout(cross_attn(ln2(h), memory, false), p, rng));
    return add(h, dropout(ff(ln3(h)), p, rng));
  }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  /// Applies one update from the accumulated gradients; returns the
  /// pre-clipping gradient norm.
  double step(ParameterStore& ps) {
    ++t_;
    const double norm = ps.grad_norm();
    const double factor = (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (const auto& name : ps.names()) {
      Var& p = ps.get(name);
      if (p.grad().size() == 0) continue;
      auto [it, inserted] = state_.try_emplace(name);
      if (inserted) {
        it->second.m = Matrix::Zero(p.rows(), p.cols());
        it->second.v = Matrix::Zero(p.rows(), p.cols());
      }
      auto& s = it->second;
      const Matrix g = p.grad() * factor;
      s.m = config_.beta1 * s.m + (1.0 - config_.beta1) * g;
      s.v = config_.beta2 * s.v + (1.0 - config_.beta2) * g.cwiseProduct(g);
      p.mutable_value().array() -=
          config_.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + config_.eps);
    }
    return norm;
  }

  AdamConfig& config() { return config_; }

 private:
  struct Moments {
    Matrix m, v;
  };
  AdamConfig config_;
  long long t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace sdm::nn
