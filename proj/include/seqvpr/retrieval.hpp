#pragma once

// Place database and exhaustive nearest-neighbour search under the squared
// Euclidean distance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "seqvpr/binary_io.hpp"
#include "seqvpr/checkpoint.hpp"
#include "seqvpr/composer.hpp"
#include "seqvpr/core.hpp"

namespace seqvpr {

struct IndexEntry {
  std::uint32_t place_id = 0;        // frame_id of the window's first frame
  std::uint32_t start_frame_id = 0;  // same value; kept for the tie-break rule
  std::vector<std::uint32_t> frame_ids;
};

/// Reference descriptors stored contiguously, row i = entries[i].
struct PlaceIndex {
  std::size_t dim = 0;
  std::size_t window = 0;
  ComposerKind source = ComposerKind::kGrouping;
  std::vector<float> data;
  std::vector<IndexEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::span<const float> descriptor(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }

  void add(std::span<const float> descriptor, IndexEntry entry) {
    if (descriptor.size() != dim)
      throw ShapeError("index entry has dimension " + std::to_string(descriptor.size()) +
                       ", index has " + std::to_string(dim));
    data.insert(data.end(), descriptor.begin(), descriptor.end());
    entries.push_back(std::move(entry));
  }
};

inline std::vector<float> to_floats(const Vec& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

/// Composed descriptor of one window.
inline std::vector<float> describe_window(const ComposerModel& model, const QuerySequence& q) {
  std::vector<Vec> frames;
  frames.reserve(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) frames.push_back(to_vec(q[i].features));
  return to_floats(describe(model, frames));
}

/// One entry per n-frame window of `reference`, taken every `stride` frames.
inline PlaceIndex build_index(const Traversal& reference, const ComposerModel& model,
                              std::size_t n, std::size_t stride = 1) {
  if (n == 0 || stride == 0) throw ConfigError("build_index: n and stride must be positive");
  if (reference.size() < n)
    throw ShapeError("build_index: traversal of " + std::to_string(reference.size()) +
                     " frames is shorter than the window " + std::to_string(n));
  PlaceIndex index;
  index.dim = descriptor_dim(model, n);
  index.window = n;
  index.source = kind_of(model);
  const auto count = reference.num_windows(n, stride);
  index.data.reserve(count * index.dim);
  index.entries.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const QuerySequence q(reference, w * stride, n);
    const auto ids = q.frame_ids();
    index.add(describe_window(model, q),
              IndexEntry{ids.front(), ids.front(), std::vector<std::uint32_t>(ids.begin(), ids.end())});
  }
  return index;
}

/// Squared Euclidean distance. Eight independent partial sums keep the loop
/// branch-free and vectorisable without reassociation flags.
inline float squared_distance(std::span<const float> a, std::span<const float> b) {
  const std::size_t k = a.size();
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= k; i += 8)
    for (std::size_t l = 0; l < 8; ++l) {
      const float d = a[i + l] - b[i + l];
      acc[l] += d * d;
    }
  for (; i < k; ++i) {
    const float d = a[i] - b[i];
    acc[0] += d * d;
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

struct NnResult {
  std::size_t entry = 0;
  float sq_distance = 0.0f;
};

/// Exhaustive nearest neighbour. Equal distances resolve to the lowest
/// start_frame_id, then to the lowest entry position.
inline NnResult query_nn(const PlaceIndex& index, std::span<const float> query) {
  if (index.entries.empty()) throw NoMatchError("query_nn: empty index");
  if (query.size() != index.dim)
    throw ShapeError("query_nn: query has dimension " + std::to_string(query.size()) +
                     ", index has " + std::to_string(index.dim));
  NnResult best{0, std::numeric_limits<float>::infinity()};
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const float d = squared_distance(query, index.descriptor(i));
    if (d < best.sq_distance ||
        (d == best.sq_distance &&
         index.entries[i].start_frame_id < index.entries[best.entry].start_frame_id)) {
      best = {i, d};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Persistence: "SPW1" | u8 16 | u32 dim | u32 count | u32 window | u8 source |
//   count x (u32 place_id, u32 start_frame_id, window x u32 frame_id, dim x f32)

inline std::vector<char> encode_index(const PlaceIndex& index) {
  io::ByteWriter w;
  w.bytes(kWeightsMagic);
  w.u8(kIndexKindTag);
  w.u32(static_cast<std::uint32_t>(index.dim));
  w.u32(static_cast<std::uint32_t>(index.entries.size()));
  w.u32(static_cast<std::uint32_t>(index.window));
  w.u8(static_cast<std::uint8_t>(index.source));
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const auto& e = index.entries[i];
    if (e.frame_ids.size() != index.window) throw ShapeError("index entry window mismatch");
    w.u32(e.place_id);
    w.u32(e.start_frame_id);
    for (auto id : e.frame_ids) w.u32(id);
    for (float v : index.descriptor(i)) w.f32(v);
  }
  return w.buffer();
}

inline PlaceIndex decode_index(std::string_view data) {
  io::ByteReader r(data);
  if (r.bytes(4, LoadErrorKind::kHeader) != kWeightsMagic)
    throw LoadError(LoadErrorKind::kHeader, "bad index magic", 0);
  if (r.u8(LoadErrorKind::kHeader) != kIndexKindTag)
    throw LoadError(LoadErrorKind::kHeader, "container is not a place index", 4);
  PlaceIndex index;
  index.dim = r.u32(LoadErrorKind::kHeader);
  const auto count = r.u32(LoadErrorKind::kHeader);
  index.window = r.u32(LoadErrorKind::kHeader);
  const auto source = r.u8(LoadErrorKind::kHeader);
  if (index.dim == 0 || index.window == 0)
    throw LoadError(LoadErrorKind::kHeader, "zero dimension in index header", 5);
  if (source < 1 || source > 3) throw LoadError(LoadErrorKind::kHeader, "bad source kind", 17);
  index.source = static_cast<ComposerKind>(source);
  index.data.resize(static_cast<std::size_t>(count) * index.dim);
  index.entries.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& e = index.entries[i];
    e.place_id = r.u32();
    e.start_frame_id = r.u32();
    e.frame_ids.resize(index.window);
    for (auto& id : e.frame_ids) id = r.u32();
    for (std::size_t j = 0; j < index.dim; ++j) {
      const auto at = r.offset();
      const float v = r.f32();
      if (!std::isfinite(v)) throw LoadError(LoadErrorKind::kNonFinite, "non-finite descriptor", at, i);
      index.data[i * index.dim + j] = v;
    }
  }
  if (!r.at_end()) throw LoadError(LoadErrorKind::kFormat, "trailing bytes after index", r.offset());
  return index;
}

inline void save_index(const std::filesystem::path& path, const PlaceIndex& index) {
  io::write_file_atomic(path, encode_index(index));
}

inline PlaceIndex load_index(const std::filesystem::path& path) {
  return decode_index(io::read_file(path));
}

// ---------------------------------------------------------------------------
// Search timing

struct BenchResult {
  std::size_t k = 0;
  std::size_t n = 0;
  std::size_t trials = 0;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
};

/// Times single queries against a random database of `n` descriptors of size
/// `k`. Each trial uses a fresh random query.
inline BenchResult bench_search(std::size_t k, std::size_t n, std::size_t trials,
                                std::uint64_t seed = 0) {
  if (k == 0 || n == 0 || trials == 0) throw ConfigError("bench_search: k, N and trials must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  PlaceIndex index;
  index.dim = k;
  index.window = 1;
  index.data.resize(k * n);
  for (auto& v : index.data) v = dist(rng);
  index.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    index.entries[i].place_id = index.entries[i].start_frame_id = static_cast<std::uint32_t>(i);
    index.entries[i].frame_ids = {static_cast<std::uint32_t>(i)};
  }

  std::vector<float> query(k);
  std::vector<double> times;
  times.reserve(trials);
  volatile std::size_t sink = 0;
  // one untimed pass to fault in the database pages
  for (auto& v : query) v = dist(rng);
  sink = sink + query_nn(index, query).entry;
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& v : query) v = dist(rng);
    const auto start = std::chrono::steady_clock::now();
    const auto r = query_nn(index, query);
    const auto stop = std::chrono::steady_clock::now();
    sink = sink + r.entry;
    times.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  double mean = 0.0;
  for (double t : times) mean += t;
  mean /= static_cast<double>(times.size());
  double var = 0.0;
  for (double t : times) var += (t - mean) * (t - mean);
  var = times.size() > 1 ? var / static_cast<double>(times.size() - 1) : 0.0;
  return {k, n, trials, mean, std::sqrt(var)};
}

/// CSV with header `k,N,trials,mean_ms,stddev_ms`.
inline std::string bench_csv(const std::vector<BenchResult>& rows) {
  std::string out = "k,N,trials,mean_ms,stddev_ms\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%zu,%zu,%zu,%.6f,%.6f\n", r.k, r.n, r.trials, r.mean_ms,
                  r.stddev_ms);
    out += line;
  }
  return out;
}

}  // namespace seqvpr
