#pragma once

// SPF1 feature files and the JSON manifest that groups them into a store.
//
// SPF1 layout (little-endian):
//   "SPF1" | u32 dim | u32 count | u32 condition_id | count x (u32 frame_id, dim x f32)

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "seqvpr/binary_io.hpp"
#include "seqvpr/core.hpp"

namespace seqvpr {

inline constexpr std::string_view kFeatureMagic = "SPF1";

struct FeatureFile {
  std::size_t dim = 0;
  Traversal traversal;
};

inline std::vector<char> encode_feature_file(const Traversal& traversal, std::size_t dim) {
  io::ByteWriter w;
  w.bytes(kFeatureMagic);
  w.u32(static_cast<std::uint32_t>(dim));
  w.u32(static_cast<std::uint32_t>(traversal.frames.size()));
  w.u32(traversal.condition_id);
  for (const auto& f : traversal.frames) {
    if (f.features.size() != dim)
      throw ShapeError("frame " + std::to_string(f.frame_id) + " has dimension " +
                       std::to_string(f.features.size()) + ", header declares " +
                       std::to_string(dim));
    w.u32(f.frame_id);
    for (float v : f.features) w.f32(v);
  }
  return w.buffer();
}

/// Decodes one SPF1 buffer. Frames come back sorted by ascending frame_id.
inline FeatureFile decode_feature_file(std::string_view data) {
  io::ByteReader r(data);
  if (data.empty()) throw LoadError(LoadErrorKind::kHeader, "empty feature file", 0);
  auto magic = r.bytes(4, LoadErrorKind::kHeader);
  if (magic != kFeatureMagic) throw LoadError(LoadErrorKind::kHeader, "bad magic", 0);
  const auto dim = r.u32(LoadErrorKind::kHeader);
  if (dim == 0) throw LoadError(LoadErrorKind::kHeader, "feature dimension is zero", 4);
  const auto count = r.u32(LoadErrorKind::kHeader);
  const auto condition = r.u32(LoadErrorKind::kHeader);

  const std::size_t record_bytes = 4 + 4 * static_cast<std::size_t>(dim);
  const std::size_t payload = r.remaining();
  if (payload < record_bytes * count)
    throw LoadError(LoadErrorKind::kTruncated,
                    "header declares " + std::to_string(count) + " records, payload holds " +
                        std::to_string(payload / record_bytes),
                    r.offset() + (payload / record_bytes) * record_bytes, payload / record_bytes);
  if (payload != record_bytes * count)
    throw LoadError(LoadErrorKind::kDimension,
                    std::to_string(payload - record_bytes * count) +
                        " trailing bytes do not form a record of dimension " +
                        std::to_string(dim),
                    r.offset() + record_bytes * count, count);

  FeatureFile out;
  out.dim = dim;
  out.traversal.condition_id = condition;
  out.traversal.frames.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& f = out.traversal.frames[i];
    f.frame_id = r.u32();
    f.condition_id = condition;
    f.features.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto at = r.offset();
      const float v = r.f32();
      if (!std::isfinite(v))
        throw LoadError(LoadErrorKind::kNonFinite, "non-finite feature value", at, i);
      f.features[j] = v;
    }
  }
  std::stable_sort(out.traversal.frames.begin(), out.traversal.frames.end(),
                   [](const FeatureFrame& a, const FeatureFrame& b) { return a.frame_id < b.frame_id; });
  return out;
}

inline void write_feature_file(const std::filesystem::path& path, const Traversal& traversal,
                               std::size_t dim) {
  io::write_file_atomic(path, encode_feature_file(traversal, dim));
}

inline FeatureFile read_feature_file(const std::filesystem::path& path) {
  return decode_feature_file(io::read_file(path));
}

/// Writes one SPF1 file per traversal plus `manifest.json` into `dir`.
/// Returns the manifest path.
inline std::filesystem::path write_feature_store(const std::filesystem::path& dir,
                                                 const FeatureStore& store) {
  nlohmann::json manifest;
  manifest["format"] = std::string(kFeatureMagic);
  manifest["dim"] = store.dim;
  manifest["tolerance"] = store.convention.tolerance;
  manifest["conditions"] = nlohmann::json::array();
  for (const auto& t : store.traversals) {
    const std::string file = "condition_" + std::to_string(t.condition_id) + ".spf";
    write_feature_file(dir / file, t, store.dim);
    manifest["conditions"].push_back(
        {{"condition_id", t.condition_id}, {"name", t.name}, {"file", file}});
  }
  const auto path = dir / "manifest.json";
  io::write_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

/// Loads a store from a manifest (`*.json`) or a single SPF1 file. Every
/// condition must share the same feature dimension.
inline FeatureStore load_feature_store(const std::filesystem::path& path) {
  FeatureStore store;
  auto add = [&](FeatureFile file, const std::string& name, const std::string& origin) {
    if (store.traversals.empty()) {
      store.dim = file.dim;
    } else if (file.dim != store.dim) {
      throw LoadError(LoadErrorKind::kDimension,
                      origin + " has dimension " + std::to_string(file.dim) +
                          ", store has " + std::to_string(store.dim),
                      4);
    }
    if (store.has_condition(file.traversal.condition_id))
      throw LoadError(LoadErrorKind::kFormat,
                      "duplicate condition " + std::to_string(file.traversal.condition_id) +
                          " in " + origin,
                      12);
    file.traversal.name = name;
    store.traversals.push_back(std::move(file.traversal));
  };

  if (path.extension() == ".json") {
    const auto text = io::read_file(path);
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(text);
      store.convention.tolerance = manifest.value("tolerance", 0u);
      for (const auto& entry : manifest.at("conditions")) {
        const auto file = entry.at("file").get<std::string>();
        auto decoded = read_feature_file(path.parent_path() / file);
        if (entry.contains("condition_id") &&
            entry.at("condition_id").get<std::uint32_t>() != decoded.traversal.condition_id)
          throw LoadError(LoadErrorKind::kFormat,
                          "manifest condition_id disagrees with header of " + file, 12);
        add(std::move(decoded), entry.value("name", std::string()), file);
      }
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(LoadErrorKind::kFormat, std::string("manifest: ") + e.what(), 0);
    }
  } else {
    auto decoded = read_feature_file(path);
    const auto name = "condition_" + std::to_string(decoded.traversal.condition_id);
    add(std::move(decoded), name, path.filename().string());
  }
  return store;
}

}  // namespace seqvpr
