#pragma once

// SDM-Mesh JSON v1 reader/writer.
//
//   {"model_id": str,
//    "faces": [{"id": int,
//               "triangles": [{"v": [[x,y,z],[x,y,z],[x,y,z]], "nbr": [i,j,k]}, ...],
//               "loops": [[[x,y,z], ...], ...],
//               "neighbor_faces": [int, ...]}, ...],
//    "labels": [{"type": str, "face_ids": [int, ...]}, ...]}
//
// Reals are written with 17 significant digits so a save/load round trip is
// bit exact.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sdm/error.hpp"
#include "sdm/mesh.hpp"

namespace sdm {

namespace detail {

inline void append_real(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

inline void append_vec(std::string& out, const Vec3& v) {
  out.push_back('[');
  append_real(out, v.x);
  out.push_back(',');
  append_real(out, v.y);
  out.push_back(',');
  append_real(out, v.z);
  out.push_back(']');
}

template <typename Ints>
void append_int_list(std::string& out, const Ints& values) {
  out.push_back('[');
  bool first = true;
  for (int v : values) {
    if (!first) out.push_back(',');
    first = false;
    out += std::to_string(v);
  }
  out.push_back(']');
}

inline Vec3 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("vertex must be an array of 3 numbers");
  for (const auto& c : j)
    if (!c.is_number()) throw ParseError("vertex coordinates must be numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

/// Canonical text form; identical models always produce identical bytes.
inline std::string model_to_json_text(const MeshModel& model) {
  std::string out;
  out.reserve(4096);
  out += "{\"model_id\":";
  out += nlohmann::json(model.model_id).dump();
  out += ",\"faces\":[";
  for (std::size_t f = 0; f < model.faces.size(); ++f) {
    const auto& face = model.faces[f];
    if (f) out.push_back(',');
    out += "{\"id\":" + std::to_string(face.face_id) + ",\"triangles\":[";
    for (std::size_t t = 0; t < face.triangles.size(); ++t) {
      const auto& tri = face.triangles[t];
      if (t) out.push_back(',');
      out += "{\"v\":[";
      for (int k = 0; k < 3; ++k) {
        if (k) out.push_back(',');
        detail::append_vec(out, tri.vertices[static_cast<std::size_t>(k)]);
      }
      out += "],\"nbr\":";
      detail::append_int_list(out, tri.neighbors);
      out.push_back('}');
    }
    out += "],\"loops\":[";
    for (std::size_t l = 0; l < face.loops.size(); ++l) {
      if (l) out.push_back(',');
      out.push_back('[');
      for (std::size_t k = 0; k < face.loops[l].vertices.size(); ++k) {
        if (k) out.push_back(',');
        detail::append_vec(out, face.loops[l].vertices[k]);
      }
      out.push_back(']');
    }
    out += "],\"neighbor_faces\":";
    detail::append_int_list(out, face.neighbor_face_ids);
    out.push_back('}');
  }
  out += "],\"labels\":[";
  for (std::size_t i = 0; i < model.labels.size(); ++i) {
    if (i) out.push_back(',');
    out += "{\"type\":" + nlohmann::json(model.labels[i].type).dump() + ",\"face_ids\":";
    detail::append_int_list(out, model.labels[i].face_ids);
    out.push_back('}');
  }
  out += "]}";
  return out;
}

inline nlohmann::json model_to_json(const MeshModel& model) {
  return nlohmann::json::parse(model_to_json_text(model));
}

struct MeshReadOptions {
  /// Derive missing "nbr" and "neighbor_faces" entries instead of failing
  /// (used when ingesting externally tessellated models).
  bool derive_missing_topology = false;
};

/// Parses and validates a model. Faces may appear in any order in the input.
inline MeshModel model_from_json(const nlohmann::json& j, MeshReadOptions options = {}) {
  if (!j.is_object()) throw ParseError("model must be a JSON object");
  MeshModel model;
  bool need_adjacency = false;
  try {
    model.model_id = j.value("model_id", std::string{});
    if (!j.contains("faces") || !j.at("faces").is_array()) throw ParseError("missing 'faces' array");
    for (const auto& jf : j.at("faces")) {
      FaceRecord face;
      if (!jf.contains("id") || !jf.at("id").is_number_integer()) throw ParseError("face without integer 'id'");
      face.face_id = jf.at("id").get<int>();
      bool need_tri_nbrs = false;
      for (const auto& jt : jf.at("triangles")) {
        Triangle tri;
        const auto& jv = jt.at("v");
        if (!jv.is_array() || jv.size() != 3) throw ParseError("triangle must have 3 vertices");
        for (std::size_t k = 0; k < 3; ++k) tri.vertices[k] = detail::vec_from_json(jv[k]);
        if (jt.contains("nbr")) {
          const auto& jn = jt.at("nbr");
          if (!jn.is_array() || jn.size() != 3) throw ParseError("'nbr' must hold 3 indices");
          for (std::size_t k = 0; k < 3; ++k) tri.neighbors[k] = jn[k].get<int>();
        } else if (options.derive_missing_topology) {
          need_tri_nbrs = true;
        } else {
          throw ParseError("triangle without 'nbr'");
        }
        face.triangles.push_back(tri);
      }
      for (const auto& jl : jf.at("loops")) {
        LoopPolygon loop;
        for (const auto& jv : jl) loop.vertices.push_back(detail::vec_from_json(jv));
        face.loops.push_back(std::move(loop));
      }
      if (jf.contains("neighbor_faces")) {
        face.neighbor_face_ids = jf.at("neighbor_faces").get<std::vector<int>>();
        std::sort(face.neighbor_face_ids.begin(), face.neighbor_face_ids.end());
      } else if (options.derive_missing_topology) {
        need_adjacency = true;
      } else {
        throw ParseError("face without 'neighbor_faces'");
      }
      if (need_tri_nbrs) compute_triangle_neighbors(face);
      model.faces.push_back(std::move(face));
    }
    if (j.contains("labels")) {
      for (const auto& jl : j.at("labels")) {
        FeatureLabel label;
        label.type = jl.at("type").get<std::string>();
        label.face_ids = jl.at("face_ids").get<std::vector<int>>();
        std::sort(label.face_ids.begin(), label.face_ids.end());
        model.labels.push_back(std::move(label));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed SDM-Mesh JSON: ") + e.what());
  }
  std::stable_sort(model.faces.begin(), model.faces.end(),
                   [](const FaceRecord& a, const FaceRecord& b) { return a.face_id < b.face_id; });
  if (need_adjacency) {
    // Contiguity must hold before ids can be used as indices.
    for (int i = 0; i < model.face_count(); ++i)
      if (model.faces[static_cast<std::size_t>(i)].face_id != i + 1)
        throw ValidationError("non-contiguous face IDs");
    model = compute_adjacency(std::move(model));
  }
  validate_model(model);
  return model;
}

inline MeshModel model_from_json_text(const std::string& text, MeshReadOptions options = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return model_from_json(j, options);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline MeshModel load_model(const std::filesystem::path& path, MeshReadOptions options = {}) {
  return model_from_json_text(read_text_file(path), options);
}

inline void save_model(const MeshModel& model, const std::filesystem::path& path) {
  write_text_file(path, model_to_json_text(model));
}

}  // namespace sdm
