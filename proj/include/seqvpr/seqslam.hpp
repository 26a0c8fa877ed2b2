#pragma once

// Sequence-matching baseline: frame difference matrix, local contrast
// enhancement and a constant-velocity line search.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seqvpr/core.hpp"
#include "seqvpr/retrieval.hpp"

namespace seqvpr {

/// Rows are query frames, columns reference frames.
using DifferenceMatrix = Eigen::MatrixXd;

inline DifferenceMatrix build_difference_matrix(std::span<const FeatureFrame> query,
                                                std::span<const FeatureFrame> reference) {
  if (query.empty() || reference.empty()) throw ShapeError("difference matrix: empty input");
  const auto dim = query.front().features.size();
  for (const auto* side : {&query, &reference})
    for (const auto& f : *side)
      if (f.features.size() != dim) throw ShapeError("difference matrix: dimension mismatch");
  DifferenceMatrix D(static_cast<Eigen::Index>(query.size()),
                     static_cast<Eigen::Index>(reference.size()));
  for (std::size_t q = 0; q < query.size(); ++q)
    for (std::size_t r = 0; r < reference.size(); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = static_cast<double>(query[q].features[j]) - reference[r].features[j];
        s += d * d;
      }
      D(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(r)) = s;
    }
  return D;
}

inline constexpr double kContrastEpsilon = 1e-9;

/// Normalises every entry by the mean and population standard deviation of a
/// `window`-long span of its own column. The span is centred on the entry and
/// shifted inwards at the borders; columns shorter than the window use all rows.
inline DifferenceMatrix contrast_enhance(const DifferenceMatrix& D, std::size_t window) {
  if (window == 0) throw ConfigError("contrast_enhance: window must be positive");
  const auto rows = D.rows();
  const auto span = std::min<Eigen::Index>(static_cast<Eigen::Index>(window), rows);
  DifferenceMatrix out(D.rows(), D.cols());
  for (Eigen::Index c = 0; c < D.cols(); ++c)
    for (Eigen::Index q = 0; q < rows; ++q) {
      const auto start = std::clamp<Eigen::Index>(q - span / 2, 0, rows - span);
      const auto seg = D.col(c).segment(start, span);
      const double mean = seg.mean();
      const double var = (seg.array() - mean).square().mean();
      out(q, c) = (D(q, c) - mean) / (std::sqrt(var) + kContrastEpsilon);
    }
  return out;
}

struct VelocitySweep {
  double v_min = 0.8;
  double v_max = 1.2;
  std::size_t v_steps = 5;

  double at(std::size_t i) const {
    if (v_steps <= 1) return v_min;
    return v_min + (v_max - v_min) * static_cast<double>(i) / static_cast<double>(v_steps - 1);
  }
};

struct SequenceMatch {
  std::size_t reference_start = 0;
  double velocity = 0.0;
  double score = 0.0;
};

/// Scores the lines (q_start + t, round(r + v t)), t < seq_len, by the mean of
/// `enhanced` along them and returns the lowest. Lines leaving the reference
/// are skipped; ties resolve to the lowest r, then the first velocity.
inline SequenceMatch match_sequence(const DifferenceMatrix& enhanced, std::size_t q_start,
                                    std::size_t seq_len, const VelocitySweep& sweep) {
  const auto Q = static_cast<std::size_t>(enhanced.rows());
  const auto R = static_cast<std::size_t>(enhanced.cols());
  if (seq_len == 0 || q_start + seq_len > Q)
    throw ConfigError("match_sequence: query rows [" + std::to_string(q_start) + ", " +
                      std::to_string(q_start + seq_len) + ") exceed " + std::to_string(Q));
  if (!(sweep.v_min > 0.0) || sweep.v_max < sweep.v_min || sweep.v_steps == 0)
    throw ConfigError("match_sequence: need 0 < v_min <= v_max and v_steps >= 1");

  SequenceMatch best{0, 0.0, std::numeric_limits<double>::infinity()};
  bool found = false;
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t vi = 0; vi < sweep.v_steps; ++vi) {
      const double v = sweep.at(vi);
      const double last = std::round(static_cast<double>(r) + v * static_cast<double>(seq_len - 1));
      if (last >= static_cast<double>(R)) continue;
      double sum = 0.0;
      for (std::size_t t = 0; t < seq_len; ++t) {
        const auto col = static_cast<Eigen::Index>(std::round(static_cast<double>(r) + v * static_cast<double>(t)));
        sum += enhanced(static_cast<Eigen::Index>(q_start + t), col);
      }
      const double score = sum / static_cast<double>(seq_len);
      if (score < best.score) {
        best = {r, v, score};
        found = true;
      }
    }
  if (!found) throw NoMatchError("match_sequence: reference too short for any line");
  return best;
}

struct SeqSlamParams {
  std::size_t seq_len = 10;
  VelocitySweep sweep;
  std::size_t enhance_window = 10;
};

struct SeqSlamMatch {
  std::size_t query_start = 0;
  std::uint32_t query_frame_id = 0;
  std::size_t reference_start = 0;
  std::uint32_t reference_frame_id = 0;
  double velocity = 0.0;
  double score = 0.0;
  bool correct = false;
};

struct SeqSlamResult {
  std::vector<SeqSlamMatch> matches;
  double precision = 0.0;
};

/// Matches every query start (rows 0 .. Q - seq_len). A match is correct when
/// the query's first frame and the matched reference frame are the same place.
inline SeqSlamResult run_seqslam(const Traversal& query, const Traversal& reference,
                                 const SeqSlamParams& params, const PlaceConvention& conv) {
  if (query.size() < params.seq_len)
    throw ConfigError("run_seqslam: query traversal shorter than seq_len");
  const auto D = contrast_enhance(build_difference_matrix(query.frames, reference.frames),
                                  params.enhance_window);
  SeqSlamResult out;
  std::size_t correct = 0;
  for (std::size_t q = 0; q + params.seq_len <= query.size(); ++q) {
    const auto m = match_sequence(D, q, params.seq_len, params.sweep);
    SeqSlamMatch row;
    row.query_start = q;
    row.query_frame_id = query.frames[q].frame_id;
    row.reference_start = m.reference_start;
    row.reference_frame_id = reference.frames[m.reference_start].frame_id;
    row.velocity = m.velocity;
    row.score = m.score;
    row.correct = conv.same_place(row.query_frame_id, row.reference_frame_id);
    correct += row.correct ? 1 : 0;
    out.matches.push_back(row);
  }
  out.precision = static_cast<double>(correct) / static_cast<double>(out.matches.size());
  return out;
}

/// Single-frame nearest neighbour on raw features; the reference point for
/// the sequence matcher.
inline double single_frame_precision(const Traversal& query, const Traversal& reference,
                                     const PlaceConvention& conv) {
  if (query.frames.empty()) throw ConfigError("single_frame_precision: empty query");
  PlaceIndex index;
  index.dim = reference.frames.empty() ? 0 : reference.frames.front().features.size();
  index.window = 1;
  for (const auto& f : reference.frames)
    index.add(f.features, IndexEntry{f.frame_id, f.frame_id, {f.frame_id}});
  std::size_t correct = 0;
  for (const auto& f : query.frames) {
    const auto nn = query_nn(index, f.features);
    correct += conv.same_place(f.frame_id, index.entries[nn.entry].start_frame_id) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(query.frames.size());
}

}  // namespace seqvpr
