#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "sdm/error.hpp"
#include "sdm/vec3.hpp"

namespace sdm {

/// Vertices closer than this (per coordinate) are treated as the same vertex.
inline constexpr double kVertexTolerance = 1e-9;
inline constexpr double kMinTriangleArea = 1e-12;

struct Triangle {
  std::array<Vec3, 3> vertices{};
  /// Local indices of the triangles across edges (v0,v1), (v1,v2), (v2,v0);
  /// the triangle's own index where no neighbor exists.
  std::array<int, 3> neighbors{0, 0, 0};

  bool operator==(const Triangle&) const = default;
};

struct LoopPolygon {
  std::vector<Vec3> vertices;

  bool operator==(const LoopPolygon&) const = default;
};

struct FaceRecord {
  int face_id = 0;
  std::vector<Triangle> triangles;
  std::vector<LoopPolygon> loops;
  std::vector<int> neighbor_face_ids;  // sorted, unique

  bool operator==(const FaceRecord&) const = default;
};

struct FeatureLabel {
  std::string type;
  std::vector<int> face_ids;  // sorted, unique

  bool operator==(const FeatureLabel&) const = default;
};

struct MeshModel {
  std::string model_id;
  std::vector<FaceRecord> faces;
  std::vector<FeatureLabel> labels;

  int face_count() const { return static_cast<int>(faces.size()); }
  /// Faces are stored in id order, so id k lives at index k-1.
  const FaceRecord& face(int id) const { return faces.at(static_cast<std::size_t>(id - 1)); }
  FaceRecord& face(int id) { return faces.at(static_cast<std::size_t>(id - 1)); }
  bool has_face(int id) const { return id >= 1 && id <= face_count(); }

  bool operator==(const MeshModel&) const = default;
};

struct BoundingBox {
  Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
  Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};

  void expand(const Vec3& p) {
    min = {std::min(min.x, p.x), std::min(min.y, p.y), std::min(min.z, p.z)};
    max = {std::max(max.x, p.x), std::max(max.y, p.y), std::max(max.z, p.z)};
  }
  Vec3 center() const { return (min + max) * 0.5; }
  Vec3 extent() const { return max - min; }
};

inline double triangle_area(const std::array<Vec3, 3>& v) {
  return 0.5 * norm(cross(v[1] - v[0], v[2] - v[0]));
}

inline BoundingBox bounding_box(const MeshModel& model) {
  BoundingBox box;
  for (const auto& face : model.faces) {
    for (const auto& tri : face.triangles)
      for (const auto& v : tri.vertices) box.expand(v);
    for (const auto& loop : face.loops)
      for (const auto& v : loop.vertices) box.expand(v);
  }
  return box;
}

namespace detail {

using VertexKey = std::array<std::int64_t, 3>;

inline VertexKey vertex_key(const Vec3& v) {
  return {static_cast<std::int64_t>(std::llround(v.x / kVertexTolerance)),
          static_cast<std::int64_t>(std::llround(v.y / kVertexTolerance)),
          static_cast<std::int64_t>(std::llround(v.z / kVertexTolerance))};
}

/// Undirected edge key built from the two quantized endpoints.
using EdgeKey = std::array<std::int64_t, 6>;

inline EdgeKey edge_key(const Vec3& a, const Vec3& b) {
  VertexKey ka = vertex_key(a);
  VertexKey kb = vertex_key(b);
  if (kb < ka) std::swap(ka, kb);
  return {ka[0], ka[1], ka[2], kb[0], kb[1], kb[2]};
}

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& k) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto v : k) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

}  // namespace detail

/// Fills each triangle's local neighbor indices from shared edges inside its face.
inline void compute_triangle_neighbors(FaceRecord& face) {
  std::unordered_map<detail::EdgeKey, std::vector<std::pair<int, int>>, detail::EdgeKeyHash> edges;
  const int n = static_cast<int>(face.triangles.size());
  for (int t = 0; t < n; ++t) {
    const auto& v = face.triangles[static_cast<std::size_t>(t)].vertices;
    for (int e = 0; e < 3; ++e) edges[detail::edge_key(v[e], v[(e + 1) % 3])].push_back({t, e});
  }
  for (int t = 0; t < n; ++t) face.triangles[static_cast<std::size_t>(t)].neighbors = {t, t, t};
  for (const auto& [key, uses] : edges) {
    if (uses.size() != 2) continue;
    auto [t0, e0] = uses[0];
    auto [t1, e1] = uses[1];
    if (t0 == t1) continue;
    face.triangles[static_cast<std::size_t>(t0)].neighbors[static_cast<std::size_t>(e0)] = t1;
    face.triangles[static_cast<std::size_t>(t1)].neighbors[static_cast<std::size_t>(e1)] = t0;
  }
}

/// Number of model edges used by more than two triangles.
inline int count_non_manifold_edges(const MeshModel& model) {
  std::unordered_map<detail::EdgeKey, int, detail::EdgeKeyHash> uses;
  for (const auto& face : model.faces)
    for (const auto& tri : face.triangles)
      for (int e = 0; e < 3; ++e) ++uses[detail::edge_key(tri.vertices[e], tri.vertices[(e + 1) % 3])];
  int bad = 0;
  for (const auto& [key, count] : uses)
    if (count > 2) ++bad;
  return bad;
}

/// Two faces are neighbors when a triangle edge of one coincides with a
/// triangle edge of the other (endpoints within kVertexTolerance).
inline MeshModel compute_adjacency(MeshModel model) {
  std::unordered_map<detail::EdgeKey, std::vector<int>, detail::EdgeKeyHash> owners;
  for (const auto& face : model.faces) {
    for (const auto& tri : face.triangles) {
      for (int e = 0; e < 3; ++e) {
        auto& list = owners[detail::edge_key(tri.vertices[e], tri.vertices[(e + 1) % 3])];
        if (std::find(list.begin(), list.end(), face.face_id) == list.end()) list.push_back(face.face_id);
      }
    }
  }
  std::map<int, std::set<int>> nbrs;
  for (const auto& [key, faces] : owners) {
    for (std::size_t i = 0; i < faces.size(); ++i)
      for (std::size_t j = 0; j < faces.size(); ++j)
        if (i != j) nbrs[faces[i]].insert(faces[j]);
  }
  for (auto& face : model.faces) {
    const auto& s = nbrs[face.face_id];
    face.neighbor_face_ids.assign(s.begin(), s.end());
  }
  return model;
}

/// Throws ValidationError describing the first broken invariant.
inline void validate_model(const MeshModel& model) {
  if (model.faces.empty()) throw ValidationError("model has no faces");
  const int n = model.face_count();
  for (int i = 0; i < n; ++i) {
    if (model.faces[static_cast<std::size_t>(i)].face_id != i + 1)
      throw ValidationError("non-contiguous face IDs: expected " + std::to_string(i + 1) + ", found " +
                            std::to_string(model.faces[static_cast<std::size_t>(i)].face_id));
  }
  for (const auto& face : model.faces) {
    const std::string where = "face " + std::to_string(face.face_id) + ": ";
    if (face.triangles.empty()) throw ValidationError(where + "no triangles");
    if (face.loops.empty()) throw ValidationError(where + "no loops");
    const int t_count = static_cast<int>(face.triangles.size());
    for (int t = 0; t < t_count; ++t) {
      const auto& tri = face.triangles[static_cast<std::size_t>(t)];
      for (const auto& v : tri.vertices)
        if (!is_finite(v)) throw ValidationError(where + "non-finite vertex");
      if (triangle_area(tri.vertices) <= kMinTriangleArea)
        throw ValidationError(where + "degenerate triangle " + std::to_string(t));
      for (int nb : tri.neighbors)
        if (nb < 0 || nb >= t_count) throw ValidationError(where + "triangle neighbor index out of range");
    }
    for (const auto& loop : face.loops) {
      if (loop.vertices.size() < 3) throw ValidationError(where + "loop with fewer than 3 vertices");
      for (std::size_t k = 0; k < loop.vertices.size(); ++k) {
        if (!is_finite(loop.vertices[k])) throw ValidationError(where + "non-finite loop vertex");
        const auto& next = loop.vertices[(k + 1) % loop.vertices.size()];
        if (detail::vertex_key(loop.vertices[k]) == detail::vertex_key(next))
          throw ValidationError(where + "loop has repeated consecutive vertices");
      }
    }
    int prev = 0;
    for (int nb : face.neighbor_face_ids) {
      if (nb < 1 || nb > n) throw ValidationError(where + "neighbor id out of range");
      if (nb == face.face_id) throw ValidationError(where + "face lists itself as neighbor");
      if (nb <= prev) throw ValidationError(where + "neighbor ids must be sorted and unique");
      prev = nb;
      const auto& other = model.face(nb).neighbor_face_ids;
      if (!std::binary_search(other.begin(), other.end(), face.face_id))
        throw ValidationError("broken adjacency: " + std::to_string(face.face_id) + " lists " +
                              std::to_string(nb) + " but not vice versa");
    }
  }
  if (count_non_manifold_edges(model) > 0) throw ValidationError("non-manifold edge (shared by more than two triangles)");
  for (const auto& label : model.labels) {
    if (label.type.empty()) throw ValidationError("label with empty type");
    if (label.face_ids.empty()) throw ValidationError("label '" + label.type + "' has no faces");
    int last = 0;
    for (int id : label.face_ids) {
      if (!model.has_face(id))
        throw ValidationError("label '" + label.type + "' references missing face " + std::to_string(id));
      if (id <= last) throw ValidationError("label face ids must be sorted and unique");
      last = id;
    }
  }
}

/// Applies p -> (p - offset) * scale to every vertex.
inline MeshModel transform_affine(MeshModel model, const Vec3& offset, double scale) {
  auto map = [&](Vec3& p) { p = (p - offset) * scale; };
  for (auto& face : model.faces) {
    for (auto& tri : face.triangles)
      for (auto& v : tri.vertices) map(v);
    for (auto& loop : face.loops)
      for (auto& v : loop.vertices) map(v);
  }
  return model;
}

/// Centers the bounding box at the origin and scales its largest extent to 2.
inline MeshModel normalize_model(MeshModel model) {
  const BoundingBox box = bounding_box(model);
  const Vec3 ext = box.extent();
  const double largest = std::max({ext.x, ext.y, ext.z});
  if (!(largest > 0.0) || !std::isfinite(largest)) throw GeometryError("degenerate model: zero extent");
  const Vec3 center = box.center();
  if (std::abs(largest - 2.0) <= 1e-12 && norm(center) <= 1e-12) return model;
  return transform_affine(std::move(model), center, 2.0 / largest);
}

/// Sorted face ids of every labeled feature whose type matches.
inline std::vector<const FeatureLabel*> labels_of_type(const MeshModel& model, const std::string& type) {
  std::vector<const FeatureLabel*> out;
  for (const auto& label : model.labels)
    if (label.type == type) out.push_back(&label);
  return out;
}

}  // namespace sdm
