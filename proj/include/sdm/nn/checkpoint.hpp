#pragma once

// Checkpoint layout:
//   "sdm-ckpt-1\n"
//   u64 little-endian: byte length of the JSON header
//   JSON header: {"version", "config", "tensors": [{"name","rows","cols","offset"}]}
//   raw little-endian float64 data, row-major, at the listed element offsets

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "sdm/error.hpp"
#include "sdm/nn/tensor.hpp"

namespace sdm::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr const char* kCheckpointVersion = "sdm-ckpt-1";

struct CheckpointData {
  nlohmann::json config;
  std::map<std::string, Matrix> tensors;
};

inline void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                            const std::map<std::string, Matrix>& tensors) {
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : tensors) {
    index.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size());
  }
  const std::string header = nlohmann::json{{"version", kCheckpointVersion}, {"config", config}, {"tensors", index}}.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << kCheckpointVersion << '\n';
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [_, m] : tensors)
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!out) throw IoError("short write on checkpoint " + path.string());
}

inline CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointVersion) throw ParseError(path.string() + ": not an " + std::string(kCheckpointVersion) + " checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ull << 30)) throw ParseError(path.string() + ": bad checkpoint header");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError(path.string() + ": truncated checkpoint header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const auto data_start = in.tellg();
  CheckpointData out;
  out.config = h.at("config");
  for (const auto& t : h.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    in.seekg(data_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>() * sizeof(double)));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw ParseError(path.string() + ": truncated tensor '" + t.at("name").get<std::string>() + "'");
    out.tensors.emplace(t.at("name").get<std::string>(), std::move(m));
  }
  return out;
}

}  // namespace sdm::nn
