#pragma once

// Face-wise token arrays for a tessellated model.
//
//   segment (v1, v2)  -> [v1; v2 - v1]                          6 reals
//   loop v1..vn       -> one segment token per edge, closing    n x 6
//   triangle          -> location [C], shape [N; D1; D2; D3; NI] 3 + 15
//
// Vertices get no tokens of their own; they are implied by the segments.

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdm/error.hpp"
#include "sdm/mesh.hpp"

namespace sdm {

struct SegmentToken {
  std::array<double, 6> values{};
};

struct PolygonToken {
  std::vector<std::array<double, 6>> rows;
};

struct TriangleToken {
  std::array<double, 3> location{};
  /// [N(3), D1(3), D2(3), D3(3), NI(3)]
  std::array<double, 15> shape{};

  Vec3 normal() const { return {shape[0], shape[1], shape[2]}; }
  Vec3 corner(int i) const { return {shape[3 + 3 * i], shape[4 + 3 * i], shape[5 + 3 * i]}; }
  std::array<int, 3> neighbor_indices() const {
    return {static_cast<int>(shape[12]), static_cast<int>(shape[13]), static_cast<int>(shape[14])};
  }
};

struct FaceTokenArray {
  int face_id = 0;
  std::vector<TriangleToken> triangle_tokens;
  std::vector<PolygonToken> polygon_tokens;
};

inline SegmentToken tokenize_segment(const Vec3& v1, const Vec3& v2) {
  if (detail::vertex_key(v1) == detail::vertex_key(v2)) throw GeometryError("degenerate segment: v1 == v2");
  const Vec3 d = v2 - v1;
  return {{v1.x, v1.y, v1.z, d.x, d.y, d.z}};
}

inline PolygonToken tokenize_polygon(const LoopPolygon& loop) {
  if (loop.vertices.size() < 3) throw GeometryError("loop needs at least 3 vertices");
  PolygonToken token;
  const auto& v = loop.vertices;
  token.rows.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) token.rows.push_back(tokenize_segment(v[i], v[(i + 1) % v.size()]).values);
  return token;
}

inline TriangleToken tokenize_triangle(const Triangle& tri) {
  const auto& v = tri.vertices;
  const Vec3 n = cross(v[1] - v[0], v[2] - v[0]);
  const double len = norm(n);
  if (!(0.5 * len > kMinTriangleArea)) throw GeometryError("zero-area triangle");
  const Vec3 c = (v[0] + v[1] + v[2]) / 3.0;
  const Vec3 unit = n / len;
  TriangleToken t;
  t.location = {c.x, c.y, c.z};
  t.shape[0] = unit.x;
  t.shape[1] = unit.y;
  t.shape[2] = unit.z;
  for (int i = 0; i < 3; ++i) {
    const Vec3 d = v[static_cast<std::size_t>(i)] - c;
    t.shape[static_cast<std::size_t>(3 + 3 * i)] = d.x;
    t.shape[static_cast<std::size_t>(4 + 3 * i)] = d.y;
    t.shape[static_cast<std::size_t>(5 + 3 * i)] = d.z;
  }
  for (int i = 0; i < 3; ++i) t.shape[static_cast<std::size_t>(12 + i)] = static_cast<double>(tri.neighbors[static_cast<std::size_t>(i)]);
  return t;
}

inline FaceTokenArray tokenize_face(const FaceRecord& face) {
  FaceTokenArray out;
  out.face_id = face.face_id;
  out.triangle_tokens.reserve(face.triangles.size());
  for (const auto& tri : face.triangles) out.triangle_tokens.push_back(tokenize_triangle(tri));
  for (const auto& loop : face.loops) out.polygon_tokens.push_back(tokenize_polygon(loop));
  return out;
}

/// One token array per face, in face id order. Expects a normalized model.
inline std::vector<FaceTokenArray> tokenize_model(const MeshModel& model) {
  std::vector<FaceTokenArray> out;
  out.reserve(model.faces.size());
  for (const auto& face : model.faces) out.push_back(tokenize_face(face));
  return out;
}

/// Debug dump: face-major, one section per token type.
inline nlohmann::json tokens_to_json(const std::string& model_id, const std::vector<FaceTokenArray>& tokens) {
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& f : tokens) {
    nlohmann::json loc = nlohmann::json::array(), shape = nlohmann::json::array(), polys = nlohmann::json::array();
    for (const auto& t : f.triangle_tokens) {
      loc.push_back(t.location);
      shape.push_back(t.shape);
    }
    for (const auto& p : f.polygon_tokens) polys.push_back(p.rows);
    faces.push_back({{"face_id", f.face_id}, {"triangle_location", loc}, {"triangle_shape", shape}, {"polygons", polys}});
  }
  return {{"format", "sdm-tokens-1"}, {"model_id", model_id}, {"faces", faces}};
}

}  // namespace sdm
