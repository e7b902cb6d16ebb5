#pragma once

// Parametric template generator for labeled machining-feature models.
//
// Every model is a box [0,W]x[0,D]x[0,H] (mm) with features cut from the top
// face. Faces are built directly from template polygons, so feature labels are
// exact by construction and the resulting mesh is watertight (every triangle
// edge is shared by exactly two triangles).
//
// Face ids follow construction order: bottom, top pieces (left to right),
// front pieces, back, left, right, then each feature's faces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdm/error.hpp"
#include "sdm/feature_types.hpp"
#include "sdm/mesh.hpp"
#include "sdm/mesh_io.hpp"
#include "sdm/triangulate.hpp"

namespace sdm {

struct BoxSpec {
  double width = 100.0;   // x
  double depth = 60.0;    // y
  double height = 30.0;   // z
};

/// Placement of one feature. Which fields are meaningful depends on `type`:
///   slots / notch: x0..x1 across, length (blind slot, notch), depth
///   pocket:        x0..x1, y0..y1, depth
///   holes:         cx, cy, radius, depth (blind only)
///   step:          width (along x from the right face), depth (height removed)
struct FeatureSpec {
  std::string type;
  double x0 = 0.0;
  double x1 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;
  double length = 0.0;
  double depth = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
  double width = 0.0;
};

struct SyntheticSpec {
  BoxSpec box;
  std::vector<FeatureSpec> features;
  std::uint64_t seed = 0;
};

inline constexpr int kCircleSegments = 16;
inline constexpr double kPlacementMargin = 4.0;

namespace detail {

enum class Footprint { kThrough, kFront, kInterior };

inline Footprint footprint_kind(const std::string& type) {
  if (type == "rect_through_slot" || type == "triangular_slot" || type == "step") return Footprint::kThrough;
  if (type == "rect_blind_slot" || type == "side_notch") return Footprint::kFront;
  return Footprint::kInterior;
}

struct Rect2 {
  double x0, x1, y0, y1;
};

inline Rect2 footprint(const FeatureSpec& f, const BoxSpec& box) {
  switch (footprint_kind(f.type)) {
    case Footprint::kThrough:
      if (f.type == "step") return {box.width - f.width, box.width, 0.0, box.depth};
      return {f.x0, f.x1, 0.0, box.depth};
    case Footprint::kFront:
      return {f.x0, f.x1, 0.0, f.length};
    case Footprint::kInterior:
      break;
  }
  if (f.type == "rect_pocket") return {f.x0, f.x1, f.y0, f.y1};
  return {f.cx - f.radius, f.cx + f.radius, f.cy - f.radius, f.cy + f.radius};
}

inline Point2 circle_point(double cx, double cy, double r, int k) {
  const double theta = 2.0 * std::numbers::pi * static_cast<double>(k % kCircleSegments) / kCircleSegments;
  return {cx + r * std::cos(theta), cy + r * std::sin(theta)};
}

inline Vec3 unit(const Vec3& v) {
  const double n = norm(v);
  if (n == 0.0) throw GeometryError("zero-length normal");
  return v / n;
}

/// Builds a planar face from 3D rings (outer first) and its outward normal.
inline FaceRecord make_planar_face(const std::vector<std::vector<Vec3>>& rings, const Vec3& normal) {
  const Vec3 n = unit(normal);
  const Vec3 u = unit(std::abs(n.x) < 0.9 ? cross(n, Vec3{1, 0, 0}) : cross(n, Vec3{0, 1, 0}));
  const Vec3 v = cross(n, u);
  std::vector<std::vector<Point2>> rings2;
  std::vector<Vec3> flat;
  for (const auto& ring : rings) {
    std::vector<Point2> r2;
    for (const auto& p : ring) {
      r2.push_back({dot(p, u), dot(p, v)});
      flat.push_back(p);
    }
    rings2.push_back(std::move(r2));
  }
  FaceRecord face;
  for (const auto& t : triangulate_polygon(rings2)) {
    Triangle tri;
    for (int k = 0; k < 3; ++k) tri.vertices[static_cast<std::size_t>(k)] = flat[static_cast<std::size_t>(t[static_cast<std::size_t>(k)])];
    face.triangles.push_back(tri);
  }
  for (std::size_t r = 0; r < rings.size(); ++r) {
    double area = 0.0;
    const auto& r2 = rings2[r];
    for (std::size_t i = 0; i < r2.size(); ++i) {
      const auto& p = r2[i];
      const auto& q = r2[(i + 1) % r2.size()];
      area += p.x * q.y - q.x * p.y;
    }
    LoopPolygon loop{rings[r]};
    const bool want_ccw = (r == 0);
    if ((area > 0.0) != want_ccw) std::reverse(loop.vertices.begin(), loop.vertices.end());
    face.loops.push_back(std::move(loop));
  }
  compute_triangle_neighbors(face);
  return face;
}

inline FaceRecord make_quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, const Vec3& normal) {
  return make_planar_face({{a, b, c, d}}, normal);
}

/// Half of a cylindrical hole wall between circle indices k0..k1, with
/// normals pointing towards the hole axis.
inline FaceRecord make_cylinder_half(double cx, double cy, double r, int k0, int k1, double z0, double z1) {
  FaceRecord face;
  auto at = [&](int k, double z) {
    const Point2 p = circle_point(cx, cy, r, k);
    return Vec3{p.x, p.y, z};
  };
  for (int k = k0; k < k1; ++k) {
    const Vec3 a0 = at(k, z0), b0 = at(k + 1, z0), a1 = at(k, z1), b1 = at(k + 1, z1);
    std::array<std::array<Vec3, 3>, 2> quads{{{a0, b1, b0}, {a0, a1, b1}}};
    for (auto& tv : quads) {
      const Vec3 centroid = (tv[0] + tv[1] + tv[2]) / 3.0;
      const Vec3 inward{cx - centroid.x, cy - centroid.y, 0.0};
      if (dot(cross(tv[1] - tv[0], tv[2] - tv[0]), inward) < 0.0) std::swap(tv[1], tv[2]);
      Triangle tri;
      tri.vertices = tv;
      face.triangles.push_back(tri);
    }
  }
  LoopPolygon loop;
  for (int k = k0; k <= k1; ++k) loop.vertices.push_back(at(k, z0));
  for (int k = k1; k >= k0; --k) loop.vertices.push_back(at(k, z1));
  face.loops.push_back(std::move(loop));
  compute_triangle_neighbors(face);
  return face;
}

inline std::vector<Vec3> circle_ring(const FeatureSpec& f, double z) {
  std::vector<Vec3> ring;
  for (int k = 0; k < kCircleSegments; ++k) {
    const Point2 p = circle_point(f.cx, f.cy, f.radius, k);
    ring.push_back({p.x, p.y, z});
  }
  return ring;
}

inline std::vector<Vec3> rect_ring_xy(double x0, double x1, double y0, double y1, double z) {
  return {{x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z}};
}

struct FeatureFaces {
  std::string type;
  std::vector<FaceRecord> faces;
};

/// Profile of a vertical side face (y = const) in (x, z): the piece spans
/// [x0, x1]; `cuts` are the features that notch its top edge.
inline std::vector<Vec3> side_profile(double x0, double x1, double y, const BoxSpec& box,
                                      const std::vector<const FeatureSpec*>& cuts, const FeatureSpec* step) {
  const double H = box.height;
  std::vector<Vec3> ring{{x0, y, 0.0}, {x1, y, 0.0}};
  if (step && x1 == box.width) {
    const double low = H - step->depth;
    const double sx = box.width - step->width;
    ring.push_back({x1, y, low});
    ring.push_back({sx, y, low});
    ring.push_back({sx, y, H});
  } else {
    ring.push_back({x1, y, H});
  }
  std::vector<const FeatureSpec*> sorted = cuts;
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->x1 > b->x1; });
  for (const auto* f : sorted) {
    const double low = H - f->depth;
    if (f->type == "triangular_slot") {
      ring.push_back({f->x1, y, H});
      ring.push_back({0.5 * (f->x0 + f->x1), y, low});
      ring.push_back({f->x0, y, H});
    } else {
      ring.push_back({f->x1, y, H});
      ring.push_back({f->x1, y, low});
      ring.push_back({f->x0, y, low});
      ring.push_back({f->x0, y, H});
    }
  }
  ring.push_back({x0, y, H});
  return ring;
}

/// Outer ring of a horizontal face piece [x0,x1] x [0,D] at height z with
/// U-shaped notches along its front edge.
inline std::vector<Vec3> notched_rect(double x0, double x1, double D, double z,
                                      const std::vector<const FeatureSpec*>& notches) {
  std::vector<const FeatureSpec*> sorted = notches;
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->x0 < b->x0; });
  std::vector<Vec3> ring{{x0, 0.0, z}};
  for (const auto* f : sorted) {
    ring.push_back({f->x0, 0.0, z});
    ring.push_back({f->x0, f->length, z});
    ring.push_back({f->x1, f->length, z});
    ring.push_back({f->x1, 0.0, z});
  }
  ring.push_back({x1, 0.0, z});
  ring.push_back({x1, D, z});
  ring.push_back({x0, D, z});
  return ring;
}

inline std::vector<Vec3> interior_ring(const FeatureSpec& f, double z) {
  if (f.type == "rect_pocket") return rect_ring_xy(f.x0, f.x1, f.y0, f.y1, z);
  return circle_ring(f, z);
}

inline FeatureFaces build_feature_faces(const FeatureSpec& f, const BoxSpec& box) {
  const double W = box.width, D = box.depth, H = box.height;
  FeatureFaces out{f.type, {}};
  auto& fs = out.faces;
  const Vec3 px{1, 0, 0}, nx{-1, 0, 0}, py{0, 1, 0}, ny{0, -1, 0}, pz{0, 0, 1};
  if (f.type == "rect_through_slot" || f.type == "rect_blind_slot") {
    const double low = H - f.depth;
    const double ylen = f.type == "rect_through_slot" ? D : f.length;
    fs.push_back(make_quad({f.x0, 0, low}, {f.x0, ylen, low}, {f.x0, ylen, H}, {f.x0, 0, H}, px));
    fs.push_back(make_planar_face({rect_ring_xy(f.x0, f.x1, 0.0, ylen, low)}, pz));
    if (f.type == "rect_blind_slot")
      fs.push_back(make_quad({f.x0, ylen, low}, {f.x1, ylen, low}, {f.x1, ylen, H}, {f.x0, ylen, H}, ny));
    fs.push_back(make_quad({f.x1, 0, low}, {f.x1, ylen, low}, {f.x1, ylen, H}, {f.x1, 0, H}, nx));
  } else if (f.type == "triangular_slot") {
    const double low = H - f.depth;
    const double m = 0.5 * (f.x0 + f.x1);
    fs.push_back(make_quad({f.x0, 0, H}, {m, 0, low}, {m, D, low}, {f.x0, D, H}, {f.depth, 0, m - f.x0}));
    fs.push_back(make_quad({m, 0, low}, {f.x1, 0, H}, {f.x1, D, H}, {m, D, low}, {-f.depth, 0, f.x1 - m}));
  } else if (f.type == "side_notch") {
    fs.push_back(make_quad({f.x0, 0, 0}, {f.x0, f.length, 0}, {f.x0, f.length, H}, {f.x0, 0, H}, px));
    fs.push_back(make_quad({f.x0, f.length, 0}, {f.x1, f.length, 0}, {f.x1, f.length, H}, {f.x0, f.length, H}, ny));
    fs.push_back(make_quad({f.x1, 0, 0}, {f.x1, f.length, 0}, {f.x1, f.length, H}, {f.x1, 0, H}, nx));
  } else if (f.type == "step") {
    const double sx = W - f.width;
    const double low = H - f.depth;
    fs.push_back(make_quad({sx, 0, low}, {sx, D, low}, {sx, D, H}, {sx, 0, H}, px));
    fs.push_back(make_planar_face({rect_ring_xy(sx, W, 0.0, D, low)}, pz));
  } else if (f.type == "rect_pocket") {
    const double low = H - f.depth;
    fs.push_back(make_quad({f.x0, f.y0, low}, {f.x0, f.y1, low}, {f.x0, f.y1, H}, {f.x0, f.y0, H}, px));
    fs.push_back(make_quad({f.x0, f.y0, low}, {f.x1, f.y0, low}, {f.x1, f.y0, H}, {f.x0, f.y0, H}, py));
    fs.push_back(make_quad({f.x1, f.y0, low}, {f.x1, f.y1, low}, {f.x1, f.y1, H}, {f.x1, f.y0, H}, nx));
    fs.push_back(make_quad({f.x0, f.y1, low}, {f.x1, f.y1, low}, {f.x1, f.y1, H}, {f.x0, f.y1, H}, ny));
    fs.push_back(make_planar_face({rect_ring_xy(f.x0, f.x1, f.y0, f.y1, low)}, pz));
  } else if (f.type == "circular_through_hole" || f.type == "circular_blind_hole") {
    const double low = f.type == "circular_through_hole" ? 0.0 : H - f.depth;
    const int half = kCircleSegments / 2;
    fs.push_back(make_cylinder_half(f.cx, f.cy, f.radius, 0, half, low, H));
    fs.push_back(make_cylinder_half(f.cx, f.cy, f.radius, half, kCircleSegments, low, H));
    if (f.type == "circular_blind_hole") fs.push_back(make_planar_face({circle_ring(f, low)}, pz));
  } else {
    throw InvalidArgument("unknown feature type '" + f.type + "'");
  }
  return out;
}

}  // namespace detail

/// Checks that every feature stays inside the box, keeps clear of the other
/// features and of the faces it must not touch. Returns an empty string when
/// the layout is valid, otherwise the reason.
inline std::string check_layout(const SyntheticSpec& spec) {
  const auto& box = spec.box;
  const double m = kPlacementMargin;
  int steps = 0;
  for (std::size_t i = 0; i < spec.features.size(); ++i) {
    const auto& f = spec.features[i];
    if (!feature_type_info(f.type)) return "unknown feature type '" + f.type + "'";
    const auto r = detail::footprint(f, box);
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) return f.type + ": empty footprint";
    if (r.x0 < m) return f.type + ": too close to the left face";
    const auto kind = detail::footprint_kind(f.type);
    if (f.type == "step") {
      ++steps;
    } else if (r.x1 > box.width - m) {
      return f.type + ": too close to the right face";
    }
    if (kind != detail::Footprint::kThrough && r.y1 > box.depth - m) return f.type + ": too close to the back face";
    if (kind == detail::Footprint::kInterior && r.y0 < m) return f.type + ": too close to the front face";
    const bool full_height = f.type == "side_notch" || f.type == "circular_through_hole";
    if (!full_height && !(f.depth > 0.0 && f.depth <= box.height - m)) return f.type + ": bad depth";
    for (std::size_t j = 0; j < i; ++j) {
      const auto o = detail::footprint(spec.features[j], box);
      if (r.x0 < o.x1 + m && o.x0 < r.x1 + m && r.y0 < o.y1 + m && o.y0 < r.y1 + m)
        return f.type + ": overlaps " + spec.features[j].type;
    }
  }
  if (steps > 1) return "at most one step per model";
  return {};
}

/// Assembles the labeled model described by `spec`.
inline MeshModel build_model(const SyntheticSpec& spec, std::string model_id) {
  if (auto why = check_layout(spec); !why.empty()) throw InvalidArgument("invalid layout: " + why);
  const auto& box = spec.box;
  const double W = box.width, D = box.depth, H = box.height;
  using detail::Footprint;
  std::vector<const FeatureSpec*> through, front, interior;
  const FeatureSpec* step = nullptr;
  for (const auto& f : spec.features) {
    switch (detail::footprint_kind(f.type)) {
      case Footprint::kThrough:
        if (f.type == "step")
          step = &f;
        else
          through.push_back(&f);
        break;
      case Footprint::kFront:
        front.push_back(&f);
        break;
      case Footprint::kInterior:
        interior.push_back(&f);
        break;
    }
  }
  std::sort(through.begin(), through.end(), [](auto* a, auto* b) { return a->x0 < b->x0; });
  auto within = [](const detail::Rect2& r, double x0, double x1) { return r.x0 > x0 && r.x1 < x1; };

  std::vector<FaceRecord> faces;
  const Vec3 px{1, 0, 0}, nx{-1, 0, 0}, py{0, 1, 0}, ny{0, -1, 0}, pz{0, 0, 1}, nz{0, 0, -1};

  // Bottom: notched by side notches, pierced by through holes.
  {
    std::vector<const FeatureSpec*> notches;
    for (auto* f : front)
      if (f->type == "side_notch") notches.push_back(f);
    std::vector<std::vector<Vec3>> rings{detail::notched_rect(0.0, W, D, 0.0, notches)};
    for (auto* f : interior)
      if (f->type == "circular_through_hole") rings.push_back(detail::circle_ring(*f, 0.0));
    faces.push_back(detail::make_planar_face(rings, nz));
  }
  // Top pieces between through features.
  {
    std::vector<std::pair<double, double>> pieces;
    double cur = 0.0;
    for (auto* f : through) {
      pieces.push_back({cur, f->x0});
      cur = f->x1;
    }
    const double end = step ? W - step->width : W;
    pieces.push_back({cur, end});
    for (auto [x0, x1] : pieces) {
      std::vector<const FeatureSpec*> notches;
      for (auto* f : front)
        if (within(detail::footprint(*f, box), x0, x1)) notches.push_back(f);
      std::vector<std::vector<Vec3>> rings{detail::notched_rect(x0, x1, D, H, notches)};
      for (auto* f : interior)
        if (within(detail::footprint(*f, box), x0, x1)) rings.push_back(detail::interior_ring(*f, H));
      faces.push_back(detail::make_planar_face(rings, pz));
    }
  }
  // Front pieces, split by side notches.
  {
    std::vector<const FeatureSpec*> splits;
    for (auto* f : front)
      if (f->type == "side_notch") splits.push_back(f);
    std::sort(splits.begin(), splits.end(), [](auto* a, auto* b) { return a->x0 < b->x0; });
    std::vector<std::pair<double, double>> pieces;
    double cur = 0.0;
    for (auto* f : splits) {
      pieces.push_back({cur, f->x0});
      cur = f->x1;
    }
    pieces.push_back({cur, W});
    for (auto [x0, x1] : pieces) {
      std::vector<const FeatureSpec*> cuts;
      for (auto* f : through)
        if (f->x0 > x0 && f->x1 < x1) cuts.push_back(f);
      for (auto* f : front)
        if (f->type == "rect_blind_slot" && f->x0 > x0 && f->x1 < x1) cuts.push_back(f);
      faces.push_back(detail::make_planar_face({detail::side_profile(x0, x1, 0.0, box, cuts, step)}, ny));
    }
  }
  // Back.
  faces.push_back(detail::make_planar_face({detail::side_profile(0.0, W, D, box, through, step)}, py));
  // Left and right.
  faces.push_back(detail::make_quad({0, 0, 0}, {0, D, 0}, {0, D, H}, {0, 0, H}, nx));
  {
    const double hr = step ? H - step->depth : H;
    faces.push_back(detail::make_quad({W, 0, 0}, {W, D, 0}, {W, D, hr}, {W, 0, hr}, px));
  }

  MeshModel model;
  model.model_id = std::move(model_id);
  for (const auto& f : spec.features) {
    auto ff = detail::build_feature_faces(f, box);
    FeatureLabel label{ff.type, {}};
    for (auto& face : ff.faces) {
      faces.push_back(std::move(face));
      label.face_ids.push_back(static_cast<int>(faces.size()));
    }
    model.labels.push_back(std::move(label));
  }
  for (std::size_t i = 0; i < faces.size(); ++i) faces[i].face_id = static_cast<int>(i + 1);
  model.faces = std::move(faces);
  model = compute_adjacency(std::move(model));
  validate_model(model);
  return model;
}

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Draws one feature of `type` at a random position (not yet checked).
inline FeatureSpec sample_feature(const std::string& type, const BoxSpec& box, std::mt19937_64& rng) {
  const double W = box.width, D = box.depth, H = box.height, m = kPlacementMargin;
  FeatureSpec f;
  f.type = type;
  if (type == "rect_through_slot" || type == "triangular_slot" || type == "rect_blind_slot" ||
      type == "side_notch") {
    const double w = uniform(rng, 6.0, 16.0);
    f.x0 = uniform(rng, m, W - m - w);
    f.x1 = f.x0 + w;
    f.depth = uniform(rng, 0.2 * H, 0.6 * H);
    if (type == "rect_blind_slot") f.length = uniform(rng, 0.3 * D, 0.7 * D);
    if (type == "side_notch") {
      f.length = uniform(rng, 0.2 * D, 0.5 * D);
      f.depth = 0.0;
    }
  } else if (type == "step") {
    f.width = uniform(rng, 8.0, 20.0);
    f.depth = uniform(rng, 0.2 * H, 0.5 * H);
  } else if (type == "rect_pocket") {
    const double w = uniform(rng, 8.0, 25.0);
    const double l = uniform(rng, 8.0, 25.0);
    f.x0 = uniform(rng, m, W - m - w);
    f.x1 = f.x0 + w;
    f.y0 = uniform(rng, m, D - m - l);
    f.y1 = f.y0 + l;
    f.depth = uniform(rng, 0.2 * H, 0.6 * H);
  } else if (type == "circular_through_hole" || type == "circular_blind_hole") {
    f.radius = uniform(rng, 3.0, 8.0);
    f.cx = uniform(rng, m + f.radius, W - m - f.radius);
    f.cy = uniform(rng, m + f.radius, D - m - f.radius);
    if (type == "circular_blind_hole") f.depth = uniform(rng, 0.2 * H, 0.6 * H);
  } else {
    throw InvalidArgument("unknown feature type '" + type + "'");
  }
  return f;
}

}  // namespace detail

/// Random layout containing `types` (in order). Each feature gets up to
/// `retries` placement attempts; returns nullopt if any cannot be placed.
inline std::optional<SyntheticSpec> random_layout(const std::vector<std::string>& types, std::mt19937_64& rng,
                                                  int retries = 50) {
  SyntheticSpec spec;
  spec.box.width = detail::uniform(rng, 80.0, 120.0);
  spec.box.depth = detail::uniform(rng, 50.0, 80.0);
  spec.box.height = detail::uniform(rng, 20.0, 40.0);
  for (const auto& type : types) {
    bool placed = false;
    for (int attempt = 0; attempt < retries && !placed; ++attempt) {
      spec.features.push_back(detail::sample_feature(type, spec.box, rng));
      if (check_layout(spec).empty()) {
        placed = true;
      } else {
        spec.features.pop_back();
      }
    }
    if (!placed) return std::nullopt;
  }
  return spec;
}

/// Model containing exactly the given feature types, reproducible from `seed`.
inline MeshModel generate_model(const std::vector<std::string>& types, std::uint64_t seed,
                                const std::string& model_id = {}) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5D3u};
  std::mt19937_64 rng(seq);
  for (int attempt = 0; attempt < 20; ++attempt) {
    auto spec = random_layout(types, rng);
    if (!spec) continue;
    spec->seed = seed;
    return build_model(*spec, model_id.empty() ? "syn-" + std::to_string(seed) : model_id);
  }
  throw InvalidArgument("could not place the requested features");
}

struct SyntheticDataset {
  std::vector<MeshModel> models;
  nlohmann::json manifest;
};

/// In-memory dataset: model i gets feature type i mod 8 first plus 0-2
/// random extra features.
inline SyntheticDataset generate_synthetic_models(int count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("count must be at least 1");
  SyntheticDataset out;
  nlohmann::json per_type = nlohmann::json::object();
  for (const auto& info : kFeatureTypes) per_type[std::string(info.key)] = 0;
  nlohmann::json entries = nlohmann::json::array();
  nlohmann::json skipped = nlohmann::json::array();
  for (int i = 0; i < count; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    std::vector<std::string> types{std::string(kFeatureTypes[static_cast<std::size_t>(i) % kFeatureTypes.size()].key)};
    const int extra = std::uniform_int_distribution<int>(0, 2)(rng);
    for (int k = 0; k < extra; ++k) {
      auto idx = std::uniform_int_distribution<std::size_t>(0, kFeatureTypes.size() - 1)(rng);
      if (kFeatureTypes[idx].key == "step" &&
          std::find(types.begin(), types.end(), "step") != types.end())
        idx = 0;
      types.emplace_back(kFeatureTypes[idx].key);
    }
    std::optional<SyntheticSpec> spec;
    for (int attempt = 0; attempt < 20 && !spec; ++attempt) spec = random_layout(types, rng);
    // Drop the extras before giving up on the model.
    if (!spec) {
      types.resize(1);
      for (int attempt = 0; attempt < 20 && !spec; ++attempt) spec = random_layout(types, rng);
    }
    char id[64];
    std::snprintf(id, sizeof(id), "syn-%llu-%05d", static_cast<unsigned long long>(seed), i + 1);
    if (!spec) {
      skipped.push_back({{"index", i + 1}, {"reason", "placement failed after retries"}});
      continue;
    }
    spec->seed = seed;
    MeshModel model = build_model(*spec, id);
    nlohmann::json feats = nlohmann::json::array();
    for (const auto& label : model.labels) {
      per_type[label.type] = per_type[label.type].get<int>() + 1;
      feats.push_back(label.type);
    }
    char file[64];
    std::snprintf(file, sizeof(file), "model_%05d.json", i + 1);
    entries.push_back({{"file", file}, {"model_id", model.model_id}, {"faces", model.face_count()}, {"features", feats}});
    out.models.push_back(std::move(model));
  }
  out.manifest = {{"format", "sdm-dataset-1"},
                  {"requested", count},
                  {"count", static_cast<int>(out.models.size())},
                  {"seed", seed},
                  {"per_type", per_type},
                  {"models", entries},
                  {"skipped", skipped}};
  return out;
}

/// Writes the dataset as one SDM-Mesh file per model plus manifest.json.
inline nlohmann::json generate_synthetic_dataset(int count, std::uint64_t seed, const std::filesystem::path& out_dir) {
  auto data = generate_synthetic_models(count, seed);
  std::filesystem::create_directories(out_dir);
  const auto& entries = data.manifest.at("models");
  for (std::size_t i = 0; i < data.models.size(); ++i)
    save_model(data.models[i], out_dir / entries[i].at("file").get<std::string>());
  write_text_file(out_dir / "manifest.json", data.manifest.dump(2) + "\n");
  return data.manifest;
}

/// Loads every model listed in a dataset manifest.
inline std::vector<MeshModel> load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::vector<MeshModel> models;
  if (std::filesystem::exists(manifest_path)) {
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(read_text_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed manifest: ") + e.what());
    }
    for (const auto& entry : manifest.at("models")) models.push_back(load_model(dir / entry.at("file").get<std::string>()));
    return models;
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) models.push_back(load_model(f));
  return models;
}

}  // namespace sdm
