#pragma once

// Face embeddings from token arrays:
//   triangle  -> location MLP, normal MLP, corner-pair MLP averaged over the
//                three rotations, one round of neighbour mixing through NI,
//                fused into one descriptor; descriptors are summed per face
//   loop rows -> shared row MLP, summed per loop
//   face     += P_loop(sum of its loops); then += P_nbr(sum of neighbour faces)
//   transformer encoder over faces (pre-norm, no positional encoding)

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdm/error.hpp"
#include "sdm/mesh.hpp"
#include "sdm/nn/layers.hpp"
#include "sdm/tokenizer.hpp"

namespace sdm {

struct EncoderConfig {
  int d_model = 256;
  int encoder_layers = 3;
  int heads = 4;
  int feed_forward_dim = 512;
  double dropout = 0.1;
  int text_dim = 256;
  int hidden = 64;  // width of the per-token perceptrons

  void validate() const {
    if (d_model < 1 || heads < 1 || d_model % heads != 0)
      throw InvalidArgument("d_model (" + std::to_string(d_model) + ") must be divisible by heads (" +
                            std::to_string(heads) + ")");
    if (text_dim != 256) throw InvalidArgument("text_dim is fixed at 256");
    if (encoder_layers < 0 || feed_forward_dim < 1 || hidden < 1) throw InvalidArgument("encoder sizes must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must be in [0, 1)");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EncoderConfig, d_model, encoder_layers, heads, feed_forward_dim, dropout,
                                                text_dim, hidden)

/// Flattened, model-wide token matrices (triangles of all faces stacked).
struct EncoderInputs {
  int faces = 0;
  int loops = 0;
  nn::Matrix location;      // T x 3
  nn::Matrix normal;        // T x 3
  nn::Matrix corner_pairs;  // 3T x 6: rows [0,T) (D1,D2), [T,2T) (D2,D3), [2T,3T) (D3,D1)
  std::array<std::vector<int>, 3> neighbor;  // model-wide triangle index of each NI entry
  std::vector<int> triangle_face;            // T, zero-based face index
  nn::Matrix polygon_rows;                   // R x 6
  std::vector<int> row_loop;                 // R
  std::vector<int> loop_face;                // loops
  nn::Matrix adjacency;                      // F x F, 1 where faces share an edge
};

inline EncoderInputs prepare_encoder_inputs(const MeshModel& model) {
  const auto tokens = tokenize_model(model);
  EncoderInputs in;
  in.faces = static_cast<int>(tokens.size());
  std::size_t tris = 0, rows = 0;
  for (const auto& f : tokens) {
    tris += f.triangle_tokens.size();
    for (const auto& p : f.polygon_tokens) rows += p.rows.size();
  }
  const auto T = static_cast<Eigen::Index>(tris);
  in.location.resize(T, 3);
  in.normal.resize(T, 3);
  in.corner_pairs.resize(3 * T, 6);
  in.polygon_rows.resize(static_cast<Eigen::Index>(rows), 6);
  Eigen::Index t = 0, r = 0;
  for (std::size_t fi = 0; fi < tokens.size(); ++fi) {
    const auto& f = tokens[fi];
    const auto base = static_cast<int>(t);
    for (const auto& tok : f.triangle_tokens) {
      for (int c = 0; c < 3; ++c) {
        in.location(t, c) = tok.location[static_cast<std::size_t>(c)];
        in.normal(t, c) = tok.shape[static_cast<std::size_t>(c)];
      }
      for (int k = 0; k < 3; ++k) {
        const Vec3 a = tok.corner(k), b = tok.corner((k + 1) % 3);
        in.corner_pairs.row(k * T + t) << a.x, a.y, a.z, b.x, b.y, b.z;
        in.neighbor[static_cast<std::size_t>(k)].push_back(base + tok.neighbor_indices()[static_cast<std::size_t>(k)]);
      }
      in.triangle_face.push_back(static_cast<int>(fi));
      ++t;
    }
    for (const auto& p : f.polygon_tokens) {
      for (const auto& row : p.rows) {
        for (int c = 0; c < 6; ++c) in.polygon_rows(r, c) = row[static_cast<std::size_t>(c)];
        in.row_loop.push_back(in.loops);
        ++r;
      }
      in.loop_face.push_back(static_cast<int>(fi));
      ++in.loops;
    }
  }
  in.adjacency = nn::Matrix::Zero(in.faces, in.faces);
  for (const auto& face : model.faces)
    for (int nb : face.neighbor_face_ids) in.adjacency(face.face_id - 1, nb - 1) = 1.0;
  return in;
}

class GeometryEncoder {
 public:
  GeometryEncoder() = default;
  GeometryEncoder(nn::ParameterStore& ps, const EncoderConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    cfg.validate();
    const int d = cfg.d_model, h = cfg.hidden;
    loc_ = nn::Mlp::create(ps, "enc.loc", 3, h, d, rng, true);
    nrm_ = nn::Mlp::create(ps, "enc.normal", 3, h, d, rng, true);
    corner_ = nn::Mlp::create(ps, "enc.corner", 6, h, d, rng, true);
    mix_ = nn::Linear::create(ps, "enc.mix", 2 * d, d, rng);
    fuse_ = nn::Linear::create(ps, "enc.fuse", 3 * d, d, rng);
    poly_ = nn::Mlp::create(ps, "enc.poly", 6, h, d, rng, true);
    p_loop_ = nn::Linear::create(ps, "enc.p_loop", d, d, rng, false);
    p_nbr_ = nn::Linear::create(ps, "enc.p_nbr", d, d, rng, false);
    for (int i = 0; i < cfg.encoder_layers; ++i)
      layers_.push_back(nn::EncoderLayer::create(ps, "enc.layer" + std::to_string(i), d, cfg.heads,
                                                 cfg.feed_forward_dim, rng));
  }

  /// Per-triangle descriptors, T x d.
  nn::Var triangle_features(const EncoderInputs& in) const {
    const auto T = in.location.rows();
    nn::Var loc = loc_(nn::constant(in.location));
    nn::Var nrm = nrm_(nn::constant(in.normal));
    nn::Var pairs = corner_(nn::constant(in.corner_pairs));
    nn::Var corner = nn::scale(
        nn::add(nn::add(nn::slice_rows(pairs, 0, T), nn::slice_rows(pairs, T, T)), nn::slice_rows(pairs, 2 * T, T)),
        1.0 / 3.0);
    nn::Var nbr = nn::scale(nn::add(nn::add(nn::gather_rows(corner, in.neighbor[0]), nn::gather_rows(corner, in.neighbor[1])),
                                    nn::gather_rows(corner, in.neighbor[2])),
                            1.0 / 3.0);
    nn::Var mixed = nn::relu(mix_(nn::concat_cols({corner, nbr})));
    return nn::relu(fuse_(nn::concat_cols({loc, nrm, mixed})));
  }

  /// Triangle descriptors sum-pooled per face, F x d.
  nn::Var face_features(const EncoderInputs& in) const {
    return nn::segment_sum(triangle_features(in), in.triangle_face, in.faces);
  }

  /// Loop vectors (row MLP, sum per loop), loops x d.
  nn::Var loop_features(const EncoderInputs& in) const {
    return nn::segment_sum(poly_(nn::constant(in.polygon_rows)), in.row_loop, in.loops);
  }

  nn::Var aggregate(const nn::Var& faces, const nn::Var& loops, const EncoderInputs& in) const {
    nn::Var f = nn::add(faces, p_loop_(nn::segment_sum(loops, in.loop_face, in.faces)));
    return nn::add(f, p_nbr_(nn::matmul(nn::constant(in.adjacency), f)));
  }

  /// E_F: one row per face. Dropout is active only when `rng` is given.
  nn::Var encode(const EncoderInputs& in, std::mt19937_64* rng = nullptr) const {
    nn::Var x = aggregate(face_features(in), loop_features(in), in);
    for (const auto& layer : layers_) x = layer(x, cfg_.dropout, rng);
    return x;
  }

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  nn::Mlp loc_, nrm_, corner_, poly_;
  nn::Linear mix_, fuse_, p_loop_, p_nbr_;
  std::vector<nn::EncoderLayer> layers_;
};

}  // namespace sdm
