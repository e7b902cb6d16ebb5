#pragma once

// Random problem instances shared by the unit and acceptance suites.

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sdm/generator.hpp"
#include "sdm/nn/tensor.hpp"

namespace testing_support {

inline sdm::nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  sdm::nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline oracle::Mat to_rows(const sdm::nn::Matrix& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

inline std::vector<double> to_vec(const sdm::nn::Matrix& m) { return {m.data(), m.data() + m.size()}; }

/// A tiny network for oracle and gradient checks.
inline sdm::NetworkConfig tiny_config(int d, int heads, std::uint64_t seed) {
  sdm::NetworkConfig c;
  c.encoder.d_model = d;
  c.encoder.heads = heads;
  c.encoder.encoder_layers = 1;
  c.encoder.feed_forward_dim = 2 * d;
  c.encoder.hidden = 4;
  c.encoder.dropout = 0.0;
  c.decoder_layers = 1;
  c.seed = seed;
  return c;
}

/// Random valid label sequence over n candidates with `size` members:
/// targets [y1..y_{size-1}, EOS, 0...] of length `length`, plus decoder inputs.
struct RandomLabels {
  std::vector<int> inputs;
  std::vector<int> targets;
  int valid = 0;
};

inline RandomLabels random_labels(int n, int size, int length, std::mt19937_64& rng) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 1);
  std::shuffle(ids.begin(), ids.end(), rng);
  RandomLabels out;
  out.inputs.assign(ids.begin(), ids.begin() + size);
  out.targets.assign(static_cast<std::size_t>(length), 0);
  for (int j = 1; j < size; ++j) out.targets[static_cast<std::size_t>(j - 1)] = out.inputs[static_cast<std::size_t>(j)];
  out.valid = size;
  return out;
}

/// Random probability rows (each row sums to one) of shape length x (n+1).
inline sdm::nn::Matrix random_distribution_rows(int length, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  sdm::nn::Matrix p(length, n + 1);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r) /= p.row(r).sum();
  return p;
}

}  // namespace testing_support
