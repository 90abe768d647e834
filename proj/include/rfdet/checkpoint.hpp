// Checkpoint container: one JSON manifest line, a newline, then every
// parameter as raw little-endian fp32 in manifest order. Weights are rounded
// to fp32 at save time, so quantizing the live store with the same rounding
// makes on-disk and in-memory evaluation agree bit for bit.
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>

#include "rfdet/autodiff.hpp"
#include "rfdet/scene_io.hpp"

namespace rfdet {

inline constexpr const char* kCheckpointFormat = "rfdet-checkpoint-v1";

inline void append_f32_le(std::string& out, float f) {
  const uint32_t bits = std::bit_cast<uint32_t>(f);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

inline float read_f32_le(const unsigned char* p) {
  const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                        (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

// Rounds every parameter through fp32, in place.
template <class T>
void quantize_f32(ParamStore<T>& store) {
  for (size_t i = 0; i < store.count(); ++i)
    for (T& v : store.at(i).value.data)
      v = static_cast<T>(static_cast<float>(v));
}

template <class T>
void save_checkpoint(const std::string& path, const ParamStore<T>& store,
                     const json& config_snapshot, uint64_t seed, double final_train_loss) {
  json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["seed"] = seed;
  manifest["final_train_loss"] = final_train_loss;
  manifest["config"] = config_snapshot;
  json params = json::array();
  std::string blob;
  for (size_t i = 0; i < store.count(); ++i) {
    const Parameter<T>& p = store.at(i);
    json entry;
    entry["name"] = p.name;
    entry["shape"] = p.value.shape;
    entry["dtype"] = "f32";
    params.push_back(entry);
    for (const T& v : p.value.data) append_f32_le(blob, static_cast<float>(v));
  }
  manifest["params"] = params;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out << manifest.dump() << "\n" << blob;
  if (!out) throw IoError("checkpoint: short write to " + path);
}

struct LoadedCheckpoint {
  json manifest;
};

// Loads a checkpoint into an existing store whose parameter names and shapes
// must match the manifest exactly (same model configuration).
template <class T>
LoadedCheckpoint load_checkpoint(const std::string& path, ParamStore<T>& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint: missing manifest line");
  json manifest;
  try {
    manifest = json::parse(line);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: bad manifest: ") + e.what());
  }
  if (!manifest.contains("format") || manifest["format"] != kCheckpointFormat)
    throw ConfigError("checkpoint: format version mismatch (want " +
                      std::string(kCheckpointFormat) + ")");
  if (!manifest.contains("params") || !manifest["params"].is_array())
    throw IoError("checkpoint: manifest has no params table");

  const auto& params = manifest["params"];
  if (params.size() != store.count())
    throw ConfigError("checkpoint: parameter count mismatch (file " +
                      std::to_string(params.size()) + ", model " +
                      std::to_string(store.count()) + ")");

  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  size_t offset = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& entry = params[static_cast<int>(i)];
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    if (entry.at("dtype").get<std::string>() != "f32")
      throw ConfigError("checkpoint: unsupported dtype for " + name);
    Parameter<T>& p = store.at(i);
    if (p.name != name)
      throw ConfigError("checkpoint: parameter order mismatch at " + std::to_string(i) +
                        " (file " + name + ", model " + p.name + ")");
    if (p.value.shape != shape) throw ConfigError("checkpoint: shape mismatch for " + name);
    const size_t bytes = static_cast<size_t>(p.value.numel()) * 4;
    if (offset + bytes > blob.size()) throw IoError("checkpoint: truncated blob");
    const unsigned char* src = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
    for (int64_t k = 0; k < p.value.numel(); ++k)
      p.value[k] = static_cast<T>(read_f32_le(src + static_cast<size_t>(k) * 4));
    offset += bytes;
  }
  if (offset != blob.size()) throw IoError("checkpoint: blob length mismatch");
  return {manifest};
}

// Reads just the manifest (for config recovery before building the model).
inline json checkpoint_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint: missing manifest line");
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: bad manifest: ") + e.what());
  }
}

}  // namespace rfdet
