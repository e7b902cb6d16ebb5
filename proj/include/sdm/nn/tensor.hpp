#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Var is a handle to a graph node; ops record closures that push
// gradients to their inputs, and backward() replays them in reverse
// topological order. Parameters are leaves that persist across graphs and
// accumulate gradients until zeroed.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdm/error.hpp"

namespace sdm::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g) {
    if (grad.size() == 0)
      grad = g;
    else
      grad += g;
  }
  Matrix& grad_buffer() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const { return node_->value(0, 0); }
  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

/// Disables graph recording on this thread (inference).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline Var constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

inline Var parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

namespace detail {

inline Var make_result(Matrix value, std::initializer_list<Var> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (grad_mode()) {
    for (const auto& in : inputs) {
      if (in.requires_grad()) {
        n->requires_grad = true;
        break;
      }
    }
  }
  if (n->requires_grad) {
    for (const auto& in : inputs) n->inputs.push_back(in.node());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

inline Var make_result_v(Matrix value, const std::vector<Var>& inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (grad_mode()) {
    for (const auto& in : inputs) {
      if (in.requires_grad()) {
        n->requires_grad = true;
        break;
      }
    }
  }
  if (n->requires_grad) {
    for (const auto& in : inputs) n->inputs.push_back(in.node());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

inline Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
}

}  // namespace detail

/// Runs reverse-mode accumulation from a scalar root (seed gradient 1).
inline void backward(const Var& root) {
  if (!root.requires_grad()) return;
  if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward: root must be a scalar");
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && child->backward && !seen.count(child)) {
        seen.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra ops.

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return detail::make_result(std::move(out), {a, b}, [](Node& self) {
    auto& A = detail::in(self, 0);
    auto& B = detail::in(self, 1);
    if (A.requires_grad) A.grad_buffer().noalias() += self.grad * B.value.transpose();
    if (B.requires_grad) B.grad_buffer().noalias() += A.value.transpose() * self.grad;
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::check_same_shape(a.value(), b.value(), "add");
  return detail::make_result(a.value() + b.value(), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (detail::in(self, i).requires_grad) detail::in(self, i).accumulate(self.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same_shape(a.value(), b.value(), "sub");
  return detail::make_result(a.value() - b.value(), {a, b}, [](Node& self) {
    if (detail::in(self, 0).requires_grad) detail::in(self, 0).accumulate(self.grad);
    if (detail::in(self, 1).requires_grad) detail::in(self, 1).accumulate(-self.grad);
  });
}

/// a (r x c) + row (1 x c) broadcast over rows.
inline Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row must be 1 x cols");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return detail::make_result(std::move(out), {a, row}, [](Node& self) {
    if (detail::in(self, 0).requires_grad) detail::in(self, 0).accumulate(self.grad);
    if (detail::in(self, 1).requires_grad) detail::in(self, 1).accumulate(self.grad.colwise().sum());
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::check_same_shape(a.value(), b.value(), "mul");
  return detail::make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    auto& A = detail::in(self, 0);
    auto& B = detail::in(self, 1);
    if (A.requires_grad) A.accumulate(self.grad.cwiseProduct(B.value));
    if (B.requires_grad) B.accumulate(self.grad.cwiseProduct(A.value));
  });
}

inline Var scale(const Var& a, double s) {
  return detail::make_result(a.value() * s, {a}, [s](Node& self) { detail::in(self, 0).accumulate(self.grad * s); });
}

inline Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return detail::make_result(std::move(out), {a}, [](Node& self) {
    auto& A = detail::in(self, 0);
    A.accumulate((A.value.array() > 0.0).select(self.grad, 0.0));
  });
}

inline Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return detail::make_result(std::move(out), {a}, [](Node& self) {
    detail::in(self, 0).accumulate((self.grad.array() * (1.0 - self.value.array().square())).matrix());
  });
}

inline Var transpose(const Var& a) {
  Matrix out = a.value().transpose();
  return detail::make_result(std::move(out), {a},
                             [](Node& self) { detail::in(self, 0).accumulate(self.grad.transpose()); });
}

inline Var sum_all(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return detail::make_result(std::move(out), {a}, [](Node& self) {
    auto& A = detail::in(self, 0);
    A.accumulate(Matrix::Constant(A.value.rows(), A.value.cols(), self.grad(0, 0)));
  });
}

/// Row-wise layer normalization with learned gain and bias (1 x cols each).
inline Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5) {
  const Eigen::Index r = x.rows(), c = x.cols();
  if (gamma.cols() != c || beta.cols() != c) throw ShapeError("layer_norm: parameter width mismatch");
  Matrix xhat(r, c);
  Eigen::VectorXd inv_std(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double mu = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return detail::make_result(std::move(out), {x, gamma, beta}, [xhat, inv_std](Node& self) {
    auto& X = detail::in(self, 0);
    auto& G = detail::in(self, 1);
    auto& B = detail::in(self, 2);
    if (G.requires_grad) G.accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
    if (B.requires_grad) B.accumulate(self.grad.colwise().sum());
    if (X.requires_grad) {
      Matrix gx = self.grad.array().rowwise() * G.value.row(0).array();
      const double n = static_cast<double>(gx.cols());
      Matrix dx(gx.rows(), gx.cols());
      for (Eigen::Index i = 0; i < gx.rows(); ++i) {
        const double mean_g = gx.row(i).sum() / n;
        const double mean_gx = gx.row(i).dot(xhat.row(i)) / n;
        dx.row(i) = (gx.row(i).array() - mean_g - xhat.row(i).array() * mean_gx) * inv_std(i);
      }
      X.accumulate(dx);
    }
  });
}

/// Row-wise softmax. Entries with allowed(i,j) == 0 get probability 0 and
/// the rest renormalize; every row must keep at least one allowed entry.
inline Var softmax_rows(const Var& x, const Matrix* allowed = nullptr) {
  const Eigen::Index r = x.rows(), c = x.cols();
  Matrix p = Matrix::Zero(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c; ++j)
      if (!allowed || (*allowed)(i, j) != 0.0) mx = std::max(mx, x.value()(i, j));
    if (!std::isfinite(mx)) throw ShapeError("softmax_rows: row with no allowed entries");
    double s = 0.0;
    for (Eigen::Index j = 0; j < c; ++j) {
      if (allowed && (*allowed)(i, j) == 0.0) continue;
      p(i, j) = std::exp(x.value()(i, j) - mx);
      s += p(i, j);
    }
    p.row(i) /= s;
  }
  return detail::make_result(p, {x}, [](Node& self) {
    const Matrix& P = self.value;
    Matrix g = self.grad;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      const double dotp = g.row(i).dot(P.row(i));
      g.row(i) = P.row(i).array() * (g.row(i).array() - dotp);
    }
    detail::in(self, 0).accumulate(g);
  });
}

inline Var gather_rows(const Var& a, std::vector<int> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return detail::make_result(std::move(out), {a}, [index = std::move(index)](Node& self) {
    Matrix& g = detail::in(self, 0).grad_buffer();
    for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

/// out[s] = sum of rows i with segment[i] == s.
inline Var segment_sum(const Var& a, std::vector<int> segment, int segments) {
  if (static_cast<Eigen::Index>(segment.size()) != a.rows()) throw ShapeError("segment_sum: one segment id per row");
  Matrix out = Matrix::Zero(segments, a.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] < 0 || segment[i] >= segments) throw ShapeError("segment_sum: segment out of range");
    out.row(segment[i]) += a.value().row(static_cast<Eigen::Index>(i));
  }
  return detail::make_result(std::move(out), {a}, [segment = std::move(segment)](Node& self) {
    Matrix g(static_cast<Eigen::Index>(segment.size()), self.grad.cols());
    for (std::size_t i = 0; i < segment.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = self.grad.row(segment[i]);
    detail::in(self, 0).accumulate(g);
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return detail::make_result_v(std::move(out), parts, [](Node& self) {
    Eigen::Index at = 0;
    for (auto& inp : self.inputs) {
      const Eigen::Index r = inp->value.rows();
      if (inp->requires_grad) inp->accumulate(self.grad.middleRows(at, r));
      at += r;
    }
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return detail::make_result_v(std::move(out), parts, [](Node& self) {
    Eigen::Index at = 0;
    for (auto& inp : self.inputs) {
      const Eigen::Index c = inp->value.cols();
      if (inp->requires_grad) inp->accumulate(self.grad.middleCols(at, c));
      at += c;
    }
  });
}

inline Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Matrix out = a.value().middleRows(start, count);
  return detail::make_result(std::move(out), {a}, [start, count](Node& self) {
    detail::in(self, 0).grad_buffer().middleRows(start, count) += self.grad;
  });
}

/// Inverted dropout; identity when p == 0 or when no rng is supplied.
inline Var dropout(const Var& a, double p, std::mt19937_64* rng) {
  if (p <= 0.0 || rng == nullptr) return a;
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? 1.0 / (1.0 - p) : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return detail::make_result(std::move(out), {a},
                             [mask](Node& self) { detail::in(self, 0).accumulate(self.grad.cwiseProduct(mask)); });
}

inline constexpr double kProbabilityClamp = 1e-7;

/// sum_{j,k} w(j,k) * [y log p + (1 - y) log(1 - p)] with p clamped to
/// [1e-7, 1 - 1e-7]; y and w are constants of p's shape. Clamped entries get
/// no gradient.
inline Var weighted_bce_sum(const Var& p, const Matrix& y, const Matrix& w) {
  detail::check_same_shape(p.value(), y, "weighted_bce_sum");
  detail::check_same_shape(p.value(), w, "weighted_bce_sum");
  const double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
  const Matrix pc = p.value().cwiseMax(lo).cwiseMin(hi);
  Matrix out(1, 1);
  out(0, 0) = (w.array() * (y.array() * pc.array().log() + (1.0 - y.array()) * (1.0 - pc.array()).log())).sum();
  return detail::make_result(std::move(out), {p}, [pc, y, w, lo, hi](Node& self) {
    auto& P = detail::in(self, 0);
    Matrix g = w.array() * (y.array() / pc.array() - (1.0 - y.array()) / (1.0 - pc.array()));
    g = (P.value.array() > lo && P.value.array() < hi).select(g, 0.0) * self.grad(0, 0);
    P.accumulate(g);
  });
}

// ---------------------------------------------------------------------------
// Fused attention kernels.

/// Multi-head scaled dot-product attention on already projected inputs.
/// q: Tq x d, k, v: Tk x d, d divisible by heads. With `causal`, query i
/// only sees keys j <= i (requires Tq == Tk).
inline Var attention(const Var& q, const Var& k, const Var& v, int heads, bool causal) {
  const Eigen::Index tq = q.rows(), tk = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != tk) throw ShapeError("attention: q/k/v widths differ");
  if (heads < 1 || d % heads != 0) throw ShapeError("attention: width not divisible by heads");
  if (causal && tq != tk) throw ShapeError("attention: causal mask needs square scores");
  const Eigen::Index dk = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix out(tq, d);
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.value().middleCols(h * dk, dk);
    const auto kh = k.value().middleCols(h * dk, dk);
    Matrix s = (qh * kh.transpose()) * inv_sqrt;
    Matrix& p = probs[static_cast<std::size_t>(h)];
    p = Matrix::Zero(tq, tk);
    for (Eigen::Index i = 0; i < tq; ++i) {
      const Eigen::Index last = causal ? i : tk - 1;
      const double mx = s.row(i).head(last + 1).maxCoeff();
      double sum = 0.0;
      for (Eigen::Index j = 0; j <= last; ++j) {
        p(i, j) = std::exp(s(i, j) - mx);
        sum += p(i, j);
      }
      p.row(i) /= sum;
    }
    out.middleCols(h * dk, dk).noalias() = p * v.value().middleCols(h * dk, dk);
  }
  return detail::make_result(std::move(out), {q, k, v}, [probs = std::move(probs), heads, dk, inv_sqrt](Node& self) {
    auto& Q = detail::in(self, 0);
    auto& K = detail::in(self, 1);
    auto& V = detail::in(self, 2);
    Matrix gq = Matrix::Zero(Q.value.rows(), Q.value.cols());
    Matrix gk = Matrix::Zero(K.value.rows(), K.value.cols());
    Matrix gv = Matrix::Zero(V.value.rows(), V.value.cols());
    for (int h = 0; h < heads; ++h) {
      const Matrix& p = probs[static_cast<std::size_t>(h)];
      const auto go = self.grad.middleCols(h * dk, dk);
      Matrix gp = go * V.value.middleCols(h * dk, dk).transpose();
      gv.middleCols(h * dk, dk).noalias() += p.transpose() * go;
      Matrix gs(p.rows(), p.cols());
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double dotp = gp.row(i).dot(p.row(i));
        gs.row(i) = p.row(i).array() * (gp.row(i).array() - dotp);
      }
      gs *= inv_sqrt;
      gq.middleCols(h * dk, dk).noalias() += gs * K.value.middleCols(h * dk, dk);
      gk.middleCols(h * dk, dk).noalias() += gs.transpose() * Q.value.middleCols(h * dk, dk);
    }
    if (Q.requires_grad) Q.accumulate(gq);
    if (K.requires_grad) K.accumulate(gk);
    if (V.requires_grad) V.accumulate(gv);
  });
}

/// Additive pointer scores: out(t, c) = sum_k v(k) * tanh(cand(c, k) + query(t, k)).
/// cand: C x d, query: T x d, v: 1 x d.
inline Var additive_scores(const Var& cand, const Var& query, const Var& v) {
  const Eigen::Index c = cand.rows(), t = query.rows(), d = cand.cols();
  if (query.cols() != d || v.cols() != d || v.rows() != 1) throw ShapeError("additive_scores: width mismatch");
  std::vector<Matrix> z(static_cast<std::size_t>(t));
  Matrix out(t, c);
  for (Eigen::Index i = 0; i < t; ++i) {
    Matrix& zi = z[static_cast<std::size_t>(i)];
    zi = (cand.value().rowwise() + query.value().row(i)).array().tanh().matrix();
    out.row(i) = (zi * v.value().transpose()).transpose();
  }
  return detail::make_result(std::move(out), {cand, query, v}, [z = std::move(z)](Node& self) {
    auto& Cn = detail::in(self, 0);
    auto& Qn = detail::in(self, 1);
    auto& Vn = detail::in(self, 2);
    Matrix gc = Matrix::Zero(Cn.value.rows(), Cn.value.cols());
    Matrix gq = Matrix::Zero(Qn.value.rows(), Qn.value.cols());
    Matrix gv = Matrix::Zero(1, Vn.value.cols());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const Matrix& zi = z[i];
      const Eigen::VectorXd go = self.grad.row(ii).transpose();  // C
      gv.row(0) += (zi.transpose() * go).transpose();
      // d/d(pre) = go(c) * v(k) * (1 - z^2)
      Matrix gpre = (1.0 - zi.array().square()).matrix();
      gpre = gpre.array().rowwise() * Vn.value.row(0).array();
      gpre = gpre.array().colwise() * go.array();
      gc += gpre;
      gq.row(ii) += gpre.colwise().sum();
    }
    if (Cn.requires_grad) Cn.accumulate(gc);
    if (Qn.requires_grad) Qn.accumulate(gq);
    if (Vn.requires_grad) Vn.accumulate(gv);
  });
}

}  // namespace sdm::nn
