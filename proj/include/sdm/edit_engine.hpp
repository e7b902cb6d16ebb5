#pragma once

// Mesh-level direct-modeling edits on a face set.
//
// Faces own their vertex copies, so moving a face set never drags an
// untargeted face along: untargeted faces stay bit-identical and the seams
// simply open (no re-stitching). Every edit is a pure function and records
// neutral API-call descriptors that replay() reproduces exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sdm/command/structured.hpp"
#include "sdm/error.hpp"
#include "sdm/mesh.hpp"
#include "sdm/vec3.hpp"

namespace sdm {

struct ApiCall {
  std::string function;  // translate_faces | rotate_faces | scale_faces | delete_faces
  nlohmann::json arguments;

  nlohmann::json to_json() const { return {{"function", function}, {"arguments", arguments}}; }
};

struct EditOp {
  std::string type;  // move | rotate | delete | resize
  std::vector<int> face_ids;
  nlohmann::json parameters = nlohmann::json::object();

  nlohmann::json to_json() const { return {{"type", type}, {"face_ids", face_ids}, {"parameters", parameters}}; }
};

struct EditResult {
  MeshModel model;
  std::vector<ApiCall> api_calls;
  std::vector<int> changed_face_ids;  // ids in `model` whose geometry changed
  std::vector<int> deleted_face_ids;  // ids in the input model
  std::vector<std::pair<int, int>> id_remap;  // surviving (old id, new id); empty without deletes

  nlohmann::json api_calls_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : api_calls) out.push_back(c.to_json());
    return out;
  }

  nlohmann::json summary() const {
    nlohmann::json j{{"api_calls", api_calls_json()},
                     {"changed_face_ids", changed_face_ids},
                     {"deleted_face_ids", deleted_face_ids},
                     {"face_count", model.face_count()}};
    if (!id_remap.empty()) {
      nlohmann::json remap = nlohmann::json::array();
      for (const auto& [from, to] : id_remap) remap.push_back({from, to});
      j["id_remap"] = remap;
    }
    return j;
  }
};

namespace detail {

inline std::vector<int> checked_targets(const MeshModel& model, std::vector<int> ids) {
  if (ids.empty()) throw EditError("edit needs at least one target face");
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (int id : ids)
    if (!model.has_face(id))
      throw EditError("face id " + std::to_string(id) + " does not exist (model has " +
                      std::to_string(model.face_count()) + " faces)");
  return ids;
}

inline int axis_index(char axis) {
  switch (axis) {
    case 'X': case 'x': return 0;
    case 'Y': case 'y': return 1;
    case 'Z': case 'z': return 2;
    default: throw EditError(std::string("axis must be X, Y or Z, got '") + axis + "'");
  }
}

inline double& component(Vec3& v, int k) { return k == 0 ? v.x : (k == 1 ? v.y : v.z); }
inline double component(const Vec3& v, int k) { return k == 0 ? v.x : (k == 1 ? v.y : v.z); }

template <class Fn>
void map_vertices(MeshModel& model, const std::vector<int>& ids, Fn&& fn) {
  for (int id : ids) {
    auto& face = model.face(id);
    for (auto& tri : face.triangles)
      for (auto& v : tri.vertices) fn(v);
    for (auto& loop : face.loops)
      for (auto& v : loop.vertices) fn(v);
  }
}

inline void check_result(const MeshModel& model) {
  try {
    validate_model(model);
  } catch (const ValidationError& e) {
    throw EditError(std::string("edit would produce an invalid model: ") + e.what());
  }
}

/// cos/sin with exact values at multiples of 90 degrees.
inline std::pair<double, double> cos_sin_deg(double deg) {
  const double r = std::fmod(deg, 360.0);
  if (r == 0.0) return {1.0, 0.0};
  if (r == 90.0 || r == -270.0) return {0.0, 1.0};
  if (r == 180.0 || r == -180.0) return {-1.0, 0.0};
  if (r == 270.0 || r == -90.0) return {0.0, -1.0};
  const double rad = deg * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

inline Vec3 vec_from_array(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw EditError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json vec_to_array(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

// The primitive transforms; both the apply_* entry points and replay() use
// these, which is what makes replay bit-exact.

inline void translate_faces(MeshModel& m, const std::vector<int>& ids, int axis, double offset) {
  map_vertices(m, ids, [&](Vec3& v) { component(v, axis) += offset; });
}

inline void rotate_faces(MeshModel& m, const std::vector<int>& ids, int axis, double angle_deg, const Vec3& c) {
  const auto [cs, sn] = cos_sin_deg(angle_deg);
  const int a = (axis + 1) % 3, b = (axis + 2) % 3;  // right-handed pair
  map_vertices(m, ids, [&](Vec3& v) {
    const double pa = component(v, a) - component(c, a);
    const double pb = component(v, b) - component(c, b);
    component(v, a) = component(c, a) + (cs * pa - sn * pb);
    component(v, b) = component(c, b) + (sn * pa + cs * pb);
  });
}

inline void scale_faces(MeshModel& m, const std::vector<int>& ids, double factor, const Vec3& c) {
  map_vertices(m, ids, [&](Vec3& v) { v = c + (v - c) * factor; });
}

/// Removes faces, renumbers the rest contiguously and rewrites adjacency and
/// labels. Returns surviving (old, new) pairs.
inline std::vector<std::pair<int, int>> delete_faces(MeshModel& m, const std::vector<int>& ids) {
  std::vector<int> new_id(static_cast<std::size_t>(m.face_count()) + 1, 0);
  std::vector<bool> gone(new_id.size(), false);
  for (int id : ids) gone[static_cast<std::size_t>(id)] = true;
  std::vector<std::pair<int, int>> remap;
  std::vector<FaceRecord> kept;
  for (auto& face : m.faces) {
    if (gone[static_cast<std::size_t>(face.face_id)]) continue;
    const int next = static_cast<int>(kept.size()) + 1;
    new_id[static_cast<std::size_t>(face.face_id)] = next;
    remap.emplace_back(face.face_id, next);
    kept.push_back(std::move(face));
  }
  auto rewrite = [&](std::vector<int>& list) {
    std::vector<int> out;
    for (int id : list)
      if (int n = new_id[static_cast<std::size_t>(id)]) out.push_back(n);
    list = std::move(out);  // monotone renumbering keeps lists sorted
  };
  for (auto& face : kept) {
    face.face_id = new_id[static_cast<std::size_t>(face.face_id)];
    rewrite(face.neighbor_face_ids);
  }
  m.faces = std::move(kept);
  std::vector<FeatureLabel> labels;
  for (auto& label : m.labels) {
    rewrite(label.face_ids);
    if (!label.face_ids.empty()) labels.push_back(std::move(label));
  }
  m.labels = std::move(labels);
  return remap;
}

}  // namespace detail

/// Area-weighted centroid of the faces' triangles.
inline Vec3 face_set_centroid(const MeshModel& model, const std::vector<int>& face_ids) {
  Vec3 acc{0, 0, 0};
  double area = 0.0;
  for (int id : detail::checked_targets(model, face_ids)) {
    for (const auto& tri : model.face(id).triangles) {
      const double a = triangle_area(tri.vertices);
      acc = acc + (tri.vertices[0] + tri.vertices[1] + tri.vertices[2]) * (a / 3.0);
      area += a;
    }
  }
  if (!(area > 0.0)) throw EditError("target faces have zero area");
  return acc * (1.0 / area);
}

inline EditResult apply_move(const MeshModel& model, const std::vector<int>& face_ids, char axis, char sign,
                             double distance_mm) {
  const auto ids = detail::checked_targets(model, face_ids);
  if (sign != '+' && sign != '-') throw EditError("sign must be '+' or '-'");
  if (!(distance_mm > 0.0) || !std::isfinite(distance_mm)) throw EditError("distance_mm must be positive");
  const int k = detail::axis_index(axis);
  const double offset = sign == '+' ? distance_mm : -distance_mm;
  EditResult r{model, {}, ids, {}, {}};
  detail::translate_faces(r.model, ids, k, offset);
  detail::check_result(r.model);
  Vec3 v{0, 0, 0};
  detail::component(v, k) = offset;
  r.api_calls.push_back({"translate_faces", {{"face_ids", ids}, {"vector", detail::vec_to_array(v)}}});
  return r;
}

inline EditResult apply_rotate(const MeshModel& model, const std::vector<int>& face_ids, char axis, double angle_deg) {
  const auto ids = detail::checked_targets(model, face_ids);
  if (!std::isfinite(angle_deg)) throw EditError("angle must be finite");
  const int k = detail::axis_index(axis);
  const Vec3 c = face_set_centroid(model, ids);
  EditResult r{model, {}, ids, {}, {}};
  detail::rotate_faces(r.model, ids, k, angle_deg, c);
  detail::check_result(r.model);
  r.api_calls.push_back({"rotate_faces",
                         {{"face_ids", ids},
                          {"axis", std::string(1, "XYZ"[k])},
                          {"angle_deg", angle_deg},
                          {"center", detail::vec_to_array(c)}}});
  return r;
}

inline EditResult apply_resize(const MeshModel& model, const std::vector<int>& face_ids, double factor) {
  const auto ids = detail::checked_targets(model, face_ids);
  if (!(factor > 0.0) || !std::isfinite(factor)) throw EditError("scale factor must be positive");
  const Vec3 c = face_set_centroid(model, ids);
  EditResult r{model, {}, ids, {}, {}};
  detail::scale_faces(r.model, ids, factor, c);
  detail::check_result(r.model);
  r.api_calls.push_back({"scale_faces", {{"face_ids", ids}, {"factor", factor}, {"center", detail::vec_to_array(c)}}});
  return r;
}

inline EditResult apply_delete(const MeshModel& model, const std::vector<int>& face_ids) {
  const auto ids = detail::checked_targets(model, face_ids);
  if (static_cast<int>(ids.size()) == model.face_count()) throw EditError("deleting every face would empty the model");
  EditResult r{model, {}, {}, ids, {}};
  r.id_remap = detail::delete_faces(r.model, ids);
  detail::check_result(r.model);
  r.api_calls.push_back({"delete_faces", {{"face_ids", ids}}});
  return r;
}

/// One EditOp per command entry, in order. `face_sets` holds either one set
/// shared by every entry or one set per entry.
inline std::vector<EditOp> compile_api_calls(const StructuredCommand& command,
                                             const std::vector<std::vector<int>>& face_sets) {
  if (command.commands.empty()) throw EditError("command has no operations");
  if (face_sets.size() != 1 && face_sets.size() != command.commands.size())
    throw EditError("expected 1 or " + std::to_string(command.commands.size()) + " face sets, got " +
                    std::to_string(face_sets.size()));
  std::vector<EditOp> ops;
  for (std::size_t i = 0; i < command.commands.size(); ++i) {
    const auto& op = command.commands[i].operation;
    if (!is_supported_operation(op.type))
      throw EditError("unsupported operation '" + op.type + "' (supported: " + supported_operations_list() + ")");
    const auto& faces = face_sets.size() == 1 ? face_sets[0] : face_sets[i];
    if (faces.empty()) throw EditError("operation " + std::to_string(i + 1) + " has no target faces");
    ops.push_back({op.type, faces, op.type == "delete" ? nlohmann::json::object() : op.parameters});
  }
  return ops;
}

inline EditResult apply_op(const MeshModel& model, const EditOp& op) {
  try {
    const auto& p = op.parameters;
    if (op.type == "move")
      return apply_move(model, op.face_ids, p.at("axis").get<std::string>().at(0), p.at("sign").get<std::string>().at(0),
                        p.at("distance_mm").get<double>());
    if (op.type == "rotate")
      return apply_rotate(model, op.face_ids, p.at("axis").get<std::string>().at(0), p.at("angle_deg").get<double>());
    if (op.type == "resize") return apply_resize(model, op.face_ids, p.at("factor").get<double>());
    if (op.type == "delete") return apply_delete(model, op.face_ids);
  } catch (const nlohmann::json::exception& e) {
    throw EditError("bad parameters for " + op.type + ": " + e.what());
  } catch (const std::out_of_range&) {
    throw EditError("bad parameters for " + op.type);
  }
  throw EditError("unsupported operation '" + op.type + "' (supported: " + supported_operations_list() + ")");
}

/// Applies ops in order. Face ids in every op refer to the input model; ids
/// are carried through earlier deletes.
inline EditResult apply_ops(const MeshModel& model, const std::vector<EditOp>& ops) {
  if (ops.empty()) throw EditError("no operations to apply");
  EditResult total{model, {}, {}, {}, {}};
  // current[id_in_input] -> id in the working model (0 = deleted)
  std::vector<int> current(static_cast<std::size_t>(model.face_count()) + 1);
  for (int i = 0; i <= model.face_count(); ++i) current[static_cast<std::size_t>(i)] = i;
  std::vector<bool> changed(current.size(), false);
  for (const auto& op : ops) {
    EditOp local = op;
    for (int& id : local.face_ids) {
      if (!model.has_face(id))
        throw EditError("face id " + std::to_string(id) + " does not exist (model has " +
                        std::to_string(model.face_count()) + " faces)");
      const int now = current[static_cast<std::size_t>(id)];
      if (now == 0) throw EditError("face " + std::to_string(id) + " was deleted by an earlier operation");
      id = now;
    }
    EditResult step = apply_op(total.model, local);
    total.model = std::move(step.model);
    for (auto& c : step.api_calls) total.api_calls.push_back(std::move(c));
    if (op.type == "delete") {
      std::vector<int> renumber(static_cast<std::size_t>(model.face_count()) + 1, 0);
      for (const auto& [from, to] : step.id_remap) renumber[static_cast<std::size_t>(from)] = to;
      for (int i = 1; i <= model.face_count(); ++i) {
        auto& c = current[static_cast<std::size_t>(i)];
        if (c == 0) continue;
        if (renumber[static_cast<std::size_t>(c)] == 0) total.deleted_face_ids.push_back(i);
        c = renumber[static_cast<std::size_t>(c)];
      }
    } else {
      for (int id : op.face_ids) changed[static_cast<std::size_t>(id)] = true;
    }
  }
  std::sort(total.deleted_face_ids.begin(), total.deleted_face_ids.end());
  const bool any_delete = !total.deleted_face_ids.empty();
  for (int i = 1; i <= model.face_count(); ++i) {
    const int now = current[static_cast<std::size_t>(i)];
    if (now == 0) continue;
    if (changed[static_cast<std::size_t>(i)]) total.changed_face_ids.push_back(now);
    if (any_delete) total.id_remap.emplace_back(i, now);
  }
  std::sort(total.changed_face_ids.begin(), total.changed_face_ids.end());
  return total;
}

/// Re-executes an api_calls log. Uses the recorded centers, so the result is
/// bit-identical to the original edit.
inline MeshModel replay(MeshModel model, const nlohmann::json& api_calls) {
  if (!api_calls.is_array()) throw EditError("api_calls must be an array");
  for (std::size_t i = 0; i < api_calls.size(); ++i) {
    const auto& call = api_calls[i];
    const std::string where = "api_calls[" + std::to_string(i) + "]: ";
    try {
      const std::string fn = call.at("function").get<std::string>();
      const auto& args = call.at("arguments");
      const auto ids = detail::checked_targets(model, args.at("face_ids").get<std::vector<int>>());
      if (fn == "translate_faces") {
        const Vec3 v = detail::vec_from_array(args.at("vector"));
        int nonzero = 0;
        for (int k = 0; k < 3; ++k) {
          const double c = detail::component(v, k);
          if (c != 0.0) {
            detail::translate_faces(model, ids, k, c);
            ++nonzero;
          }
        }
        if (nonzero == 0) throw EditError("zero translation");
      } else if (fn == "rotate_faces") {
        detail::rotate_faces(model, ids, detail::axis_index(args.at("axis").get<std::string>().at(0)),
                             args.at("angle_deg").get<double>(), detail::vec_from_array(args.at("center")));
      } else if (fn == "scale_faces") {
        const double f = args.at("factor").get<double>();
        if (!(f > 0.0)) throw EditError("scale factor must be positive");
        detail::scale_faces(model, ids, f, detail::vec_from_array(args.at("center")));
      } else if (fn == "delete_faces") {
        if (static_cast<int>(ids.size()) == model.face_count()) throw EditError("deleting every face would empty the model");
        detail::delete_faces(model, ids);
      } else {
        throw EditError("unknown function '" + fn + "'");
      }
    } catch (const EditError& e) {
      throw EditError(where + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw EditError(where + e.what());
    } catch (const std::out_of_range& e) {
      throw EditError(where + "malformed call");
    }
  }
  detail::check_result(model);
  return model;
}

}  // namespace sdm
