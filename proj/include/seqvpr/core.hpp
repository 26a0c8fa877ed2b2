#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqvpr/error.hpp"

namespace seqvpr {

/// One backbone output. `frame_id` is the ground-truth position of the frame
/// in its traversal; frames of different conditions with the same frame_id
/// depict the same location.
struct FeatureFrame {
  std::uint32_t frame_id = 0;
  std::uint32_t condition_id = 0;
  std::vector<float> features;
};

/// Frames that fall within `tolerance` indices of each other are the same place.
struct PlaceConvention {
  std::uint32_t tolerance = 0;

  bool same_place(std::uint32_t a, std::uint32_t b) const {
    const auto diff = a > b ? a - b : b - a;
    return diff <= tolerance;
  }
};

/// Two frame-id sets depict the same place iff some pair (one from each) does.
inline bool same_place(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b,
                       const PlaceConvention& conv) {
  for (auto x : a)
    for (auto y : b)
      if (conv.same_place(x, y)) return true;
  return false;
}

/// One recording of the route under a single condition, in playback order.
/// Playback order need not follow frame_id (see the reverse perturbation).
struct Traversal {
  std::uint32_t condition_id = 0;
  std::string name;
  std::vector<FeatureFrame> frames;

  std::size_t size() const { return frames.size(); }
  std::size_t num_windows(std::size_t n, std::size_t stride = 1) const {
    if (n == 0 || stride == 0 || frames.size() < n) return 0;
    return (frames.size() - n) / stride + 1;
  }
};

/// A window of n consecutive frames of one traversal. Holds pointers into the
/// owning traversal, which must outlive it.
class QuerySequence {
public:
  QuerySequence() = default;
  QuerySequence(const Traversal& traversal, std::size_t start, std::size_t n) {
    if (n == 0) throw ShapeError("query sequence must be non-empty");
    if (start + n > traversal.frames.size())
      throw ShapeError("window [" + std::to_string(start) + ", " + std::to_string(start + n) +
                       ") exceeds traversal of length " +
                       std::to_string(traversal.frames.size()));
    frames_.reserve(n);
    ids_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      frames_.push_back(&traversal.frames[start + i]);
      ids_.push_back(traversal.frames[start + i].frame_id);
    }
    start_ = start;
    condition_id_ = traversal.condition_id;
  }

  std::size_t size() const { return frames_.size(); }
  std::size_t start() const { return start_; }
  std::uint32_t condition_id() const { return condition_id_; }
  const FeatureFrame& operator[](std::size_t i) const { return *frames_[i]; }
  std::span<const std::uint32_t> frame_ids() const { return ids_; }

private:
  std::vector<const FeatureFrame*> frames_;
  std::vector<std::uint32_t> ids_;
  std::size_t start_ = 0;
  std::uint32_t condition_id_ = 0;
};

inline bool same_place(const QuerySequence& a, const QuerySequence& b,
                       const PlaceConvention& conv) {
  return same_place(a.frame_ids(), b.frame_ids(), conv);
}

/// All traversals of one dataset. Every frame has dimension `dim`.
struct FeatureStore {
  std::size_t dim = 0;
  PlaceConvention convention;
  std::vector<Traversal> traversals;

  const Traversal& condition(std::uint32_t condition_id) const {
    for (const auto& t : traversals)
      if (t.condition_id == condition_id) return t;
    throw ConfigError("unknown condition " + std::to_string(condition_id));
  }

  Traversal& condition(std::uint32_t condition_id) {
    return const_cast<Traversal&>(std::as_const(*this).condition(condition_id));
  }

  bool has_condition(std::uint32_t condition_id) const {
    return std::any_of(traversals.begin(), traversals.end(),
                       [&](const Traversal& t) { return t.condition_id == condition_id; });
  }

  std::vector<std::uint32_t> condition_ids() const {
    std::vector<std::uint32_t> ids;
    for (const auto& t : traversals) ids.push_back(t.condition_id);
    return ids;
  }

  /// Throws if any frame violates the shared-dimension or finiteness invariants.
  void validate() const {
    for (const auto& t : traversals)
      for (const auto& f : t.frames) {
        if (f.features.size() != dim)
          throw ShapeError("frame " + std::to_string(f.frame_id) + " of condition " +
                           std::to_string(t.condition_id) + " has dimension " +
                           std::to_string(f.features.size()) + ", expected " +
                           std::to_string(dim));
        for (float v : f.features)
          if (!std::isfinite(v))
            throw ShapeError("non-finite feature in frame " + std::to_string(f.frame_id));
      }
  }
};

}  // namespace seqvpr
