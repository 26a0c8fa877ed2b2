#pragma once

// SPW1 parameter checkpoints.
//
//   "SPW1" | u8 kind | shape header | f32 arrays in declaration order
//
//   grouping  (1): u32 input_dim, u32 d, u8 activation, u8 l2_normalize | head W, head b
//   fusion    (2): u32 n, u32 input_dim, u32 d_out, u8 activation, u8 l2_normalize | W, b
//   recurrent (3): u32 input_dim, u32 hidden | W_i W_f W_o W_g U_i U_f U_o U_g b_i b_f b_o b_g
//
// Matrices are row-major. Values are stored as f32, so a model survives the
// round trip exactly once its parameters are float-representable.

#include <cmath>
#include <filesystem>
#include <string_view>

#include "seqvpr/binary_io.hpp"
#include "seqvpr/composer.hpp"

namespace seqvpr {

inline constexpr std::string_view kWeightsMagic = "SPW1";
/// Container kind tag used by persisted place indices.
inline constexpr std::uint8_t kIndexKindTag = 16;

namespace detail {

inline void put_matrix(io::ByteWriter& w, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(static_cast<float>(m(r, c)));
}

inline void put_vector(io::ByteWriter& w, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f32(static_cast<float>(v[i]));
}

inline double get_finite(io::ByteReader& r) {
  const auto at = r.offset();
  const float v = r.f32();
  if (!std::isfinite(v)) throw LoadError(LoadErrorKind::kNonFinite, "non-finite parameter", at);
  return v;
}

inline Mat get_matrix(io::ByteReader& r, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get_finite(r);
  return m;
}

inline Vec get_vector(io::ByteReader& r, Eigen::Index size) {
  Vec v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = get_finite(r);
  return v;
}

inline void put_fusion_body(io::ByteWriter& w, const FusionParams& p) {
  put_matrix(w, p.W);
  put_vector(w, p.b);
}

inline FusionOptions get_fusion_options(io::ByteReader& r) {
  const auto at = r.offset();
  const auto act = r.u8(LoadErrorKind::kHeader);
  const auto norm = r.u8(LoadErrorKind::kHeader);
  if (act > 1 || norm > 1) throw LoadError(LoadErrorKind::kHeader, "bad fusion option flags", at);
  return {static_cast<Activation>(act), norm != 0};
}

}  // namespace detail

inline std::vector<char> encode_checkpoint(const ComposerModel& model) {
  io::ByteWriter w;
  w.bytes(kWeightsMagic);
  w.u8(static_cast<std::uint8_t>(kind_of(model)));
  if (auto g = std::get_if<GroupingModel>(&model)) {
    g->head.check_shape();
    w.u32(static_cast<std::uint32_t>(g->head.input_dim));
    w.u32(static_cast<std::uint32_t>(g->head.output_dim));
    w.u8(static_cast<std::uint8_t>(g->head.options.activation));
    w.u8(g->head.options.l2_normalize ? 1 : 0);
    detail::put_fusion_body(w, g->head);
  } else if (auto f = std::get_if<FusionParams>(&model)) {
    f->check_shape();
    w.u32(static_cast<std::uint32_t>(f->n));
    w.u32(static_cast<std::uint32_t>(f->input_dim));
    w.u32(static_cast<std::uint32_t>(f->output_dim));
    w.u8(static_cast<std::uint8_t>(f->options.activation));
    w.u8(f->options.l2_normalize ? 1 : 0);
    detail::put_fusion_body(w, *f);
  } else {
    const auto& p = std::get<LstmParams>(model);
    p.check_shape();
    w.u32(static_cast<std::uint32_t>(p.input_dim));
    w.u32(static_cast<std::uint32_t>(p.hidden));
    detail::put_matrix(w, p.W);
    detail::put_matrix(w, p.U);
    detail::put_vector(w, p.b);
  }
  return w.buffer();
}

inline ComposerModel decode_checkpoint(std::string_view data) {
  io::ByteReader r(data);
  if (r.bytes(4, LoadErrorKind::kHeader) != kWeightsMagic)
    throw LoadError(LoadErrorKind::kHeader, "bad checkpoint magic", 0);
  const auto kind = r.u8(LoadErrorKind::kHeader);
  auto positive = [&](std::size_t at) {
    const auto v = r.u32(LoadErrorKind::kHeader);
    if (v == 0) throw LoadError(LoadErrorKind::kHeader, "zero dimension in shape header", at);
    return static_cast<std::size_t>(v);
  };

  ComposerModel model;
  switch (kind) {
    case static_cast<std::uint8_t>(ComposerKind::kGrouping): {
      FusionParams head;
      head.n = 1;
      head.input_dim = positive(r.offset());
      head.output_dim = positive(r.offset());
      head.options = detail::get_fusion_options(r);
      head.W = detail::get_matrix(r, static_cast<Eigen::Index>(head.output_dim),
                                  static_cast<Eigen::Index>(head.input_dim));
      head.b = detail::get_vector(r, static_cast<Eigen::Index>(head.output_dim));
      model = GroupingModel{std::move(head)};
      break;
    }
    case static_cast<std::uint8_t>(ComposerKind::kFusion): {
      FusionParams p;
      p.n = positive(r.offset());
      p.input_dim = positive(r.offset());
      p.output_dim = positive(r.offset());
      p.options = detail::get_fusion_options(r);
      p.W = detail::get_matrix(r, static_cast<Eigen::Index>(p.output_dim),
                               static_cast<Eigen::Index>(p.n * p.input_dim));
      p.b = detail::get_vector(r, static_cast<Eigen::Index>(p.output_dim));
      model = std::move(p);
      break;
    }
    case static_cast<std::uint8_t>(ComposerKind::kRecurrent): {
      LstmParams p;
      p.input_dim = positive(r.offset());
      p.hidden = positive(r.offset());
      const auto h4 = static_cast<Eigen::Index>(4 * p.hidden);
      p.W = detail::get_matrix(r, h4, static_cast<Eigen::Index>(p.input_dim));
      p.U = detail::get_matrix(r, h4, static_cast<Eigen::Index>(p.hidden));
      p.b = detail::get_vector(r, h4);
      model = std::move(p);
      break;
    }
    default:
      throw LoadError(LoadErrorKind::kHeader, "unknown composer kind tag " + std::to_string(kind),
                      4);
  }
  if (!r.at_end())
    throw LoadError(LoadErrorKind::kFormat, "trailing bytes after parameters", r.offset());
  return model;
}

inline void save_checkpoint(const std::filesystem::path& path, const ComposerModel& model) {
  io::write_file_atomic(path, encode_checkpoint(model));
}

inline ComposerModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace seqvpr
