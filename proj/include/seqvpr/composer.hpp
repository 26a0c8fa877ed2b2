#pragma once

// Sequence-descriptor composers: grouping (concatenation of single-view head
// outputs), fusion (one affine layer over the stacked backbone vectors) and
// recurrent (single-layer LSTM whose final hidden state is the descriptor).

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "seqvpr/error.hpp"

namespace seqvpr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ComposerKind : std::uint8_t {
  kGrouping = 1,
  kFusion = 2,
  kRecurrent = 3,
};

inline const char* to_string(ComposerKind kind) {
  switch (kind) {
    case ComposerKind::kGrouping: return "grouping";
    case ComposerKind::kFusion: return "fusion";
    case ComposerKind::kRecurrent: return "recurrent";
  }
  return "unknown";
}

inline ComposerKind parse_composer_kind(const std::string& name) {
  if (name == "grouping") return ComposerKind::kGrouping;
  if (name == "fusion") return ComposerKind::kFusion;
  if (name == "recurrent") return ComposerKind::kRecurrent;
  throw ConfigError("unknown composer kind '" + name + "'");
}

inline Vec to_vec(std::span<const float> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

namespace detail {

// Draws at float precision; a freshly initialised model survives the f32
// checkpoint round trip unchanged.
template <class Rng>
void fill_uniform(Eigen::Ref<Mat> m, double scale, Rng& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      m(r, c) = static_cast<double>(static_cast<float>(dist(rng)));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void check_frames(std::span<const Vec> frames, std::size_t expected_count,
                         Eigen::Index dim, const char* who) {
  if (frames.size() != expected_count)
    throw ShapeError(std::string(who) + ": expected " + std::to_string(expected_count) +
                     " frames, got " + std::to_string(frames.size()));
  for (const auto& f : frames)
    if (f.size() != dim)
      throw ShapeError(std::string(who) + ": frame dimension " + std::to_string(f.size()) +
                       ", expected " + std::to_string(dim));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Grouping

/// Order-preserving concatenation of n per-frame descriptors of size d.
struct GroupingComposer {
  std::size_t n = 3;
  std::size_t d = 128;

  std::size_t output_dim() const { return n * d; }

  Vec compose(std::span<const Vec> descriptors) const {
    detail::check_frames(descriptors, n, static_cast<Eigen::Index>(d), "compose_grouping");
    Vec out(static_cast<Eigen::Index>(n * d));
    for (std::size_t i = 0; i < n; ++i)
      out.segment(static_cast<Eigen::Index>(i * d), static_cast<Eigen::Index>(d)) = descriptors[i];
    return out;
  }
};

inline Vec compose_grouping(std::span<const Vec> descriptors) {
  if (descriptors.empty()) throw ShapeError("compose_grouping: no descriptors");
  GroupingComposer g{descriptors.size(), static_cast<std::size_t>(descriptors.front().size())};
  return g.compose(descriptors);
}

// ---------------------------------------------------------------------------
// Fusion

enum class Activation : std::uint8_t { kNone = 0, kTanh = 1 };

struct FusionOptions {
  Activation activation = Activation::kNone;
  bool l2_normalize = false;
};

/// y = act(W * concat(frames) + b), optionally L2-normalised.
/// W is output_dim x (n * input_dim).
struct FusionParams {
  std::size_t n = 0;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  FusionOptions options;
  Mat W;
  Vec b;

  template <class Rng>
  static FusionParams random(std::size_t n, std::size_t input_dim, std::size_t output_dim,
                             Rng& rng, FusionOptions options = {}) {
    if (n == 0 || input_dim == 0 || output_dim == 0)
      throw ShapeError("fusion dimensions must be positive");
    FusionParams p;
    p.n = n;
    p.input_dim = input_dim;
    p.output_dim = output_dim;
    p.options = options;
    p.W.resize(static_cast<Eigen::Index>(output_dim), static_cast<Eigen::Index>(n * input_dim));
    detail::fill_uniform(p.W, 1.0 / std::sqrt(static_cast<double>(n * input_dim)), rng);
    p.b = Vec::Zero(static_cast<Eigen::Index>(output_dim));
    return p;
  }

  std::size_t num_parameters() const { return static_cast<std::size_t>(W.size() + b.size()); }

  void check_shape() const {
    if (W.rows() != static_cast<Eigen::Index>(output_dim) ||
        W.cols() != static_cast<Eigen::Index>(n * input_dim) ||
        b.size() != static_cast<Eigen::Index>(output_dim))
      throw ShapeError("fusion parameters inconsistent with declared shape");
  }
};

namespace detail {

inline Vec stack(std::span<const Vec> frames, Eigen::Index dim) {
  Vec x(static_cast<Eigen::Index>(frames.size()) * dim);
  for (std::size_t i = 0; i < frames.size(); ++i)
    x.segment(static_cast<Eigen::Index>(i) * dim, dim) = frames[i];
  return x;
}

struct FusionForward {
  Vec x;  // stacked input
  Vec a;  // post-activation, pre-normalisation
  Vec y;
  double norm = 0.0;
};

inline FusionForward fusion_forward(const FusionParams& p, std::span<const Vec> frames) {
  p.check_shape();
  check_frames(frames, p.n, static_cast<Eigen::Index>(p.input_dim), "compose_fusion");
  FusionForward f;
  f.x = stack(frames, static_cast<Eigen::Index>(p.input_dim));
  f.a = p.W * f.x + p.b;
  if (p.options.activation == Activation::kTanh) f.a = f.a.array().tanh().matrix();
  f.y = f.a;
  if (p.options.l2_normalize) {
    f.norm = f.a.norm();
    if (f.norm > 0.0) f.y /= f.norm;
  }
  return f;
}

}  // namespace detail

inline Vec compose_fusion(const FusionParams& params, std::span<const Vec> frames) {
  return detail::fusion_forward(params, frames).y;
}

struct FusionGrad {
  Mat dW;
  Vec db;
  std::vector<Vec> d_frames;
};

/// Backpropagates `upstream` (gradient w.r.t. the descriptor) through the
/// fusion layer.
inline FusionGrad grad_fusion(const FusionParams& params, std::span<const Vec> frames,
                              const Vec& upstream) {
  const auto f = detail::fusion_forward(params, frames);
  if (upstream.size() != static_cast<Eigen::Index>(params.output_dim))
    throw ShapeError("grad_fusion: upstream gradient has dimension " +
                     std::to_string(upstream.size()));
  Vec da = upstream;
  if (params.options.l2_normalize && f.norm > 0.0)
    da = (upstream - f.y * f.y.dot(upstream)) / f.norm;
  Vec dz = da;
  if (params.options.activation == Activation::kTanh)
    dz = (da.array() * (1.0 - f.a.array().square())).matrix();

  FusionGrad g;
  g.dW = dz * f.x.transpose();
  g.db = dz;
  const Vec dx = params.W.transpose() * dz;
  const auto dim = static_cast<Eigen::Index>(params.input_dim);
  for (std::size_t i = 0; i < params.n; ++i)
    g.d_frames.push_back(dx.segment(static_cast<Eigen::Index>(i) * dim, dim));
  return g;
}

/// The single-view head used by grouping: a fusion layer over one frame,
/// applied independently to every frame of the window.
struct GroupingModel {
  FusionParams head;

  std::size_t descriptor_dim() const { return head.output_dim; }

  Vec describe_frame(const Vec& frame) const {
    return compose_fusion(head, std::span<const Vec>(&frame, 1));
  }

  Vec compose(std::span<const Vec> frames) const {
    std::vector<Vec> per_frame;
    per_frame.reserve(frames.size());
    for (const auto& f : frames) per_frame.push_back(describe_frame(f));
    return compose_grouping(per_frame);
  }
};

// ---------------------------------------------------------------------------
// Recurrent

enum class Gate : int { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };
inline constexpr std::array<Gate, 4> kGates = {Gate::kInput, Gate::kForget, Gate::kOutput,
                                               Gate::kCandidate};

/// Standard LSTM cell. The four gates are stored stacked (i, f, o, g) so one
/// product evaluates them all; `input_weights(gate)` and friends expose the
/// per-gate blocks.
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  Mat W;  // 4h x input_dim
  Mat U;  // 4h x h
  Vec b;  // 4h

  template <class Rng>
  static LstmParams random(std::size_t input_dim, std::size_t hidden, Rng& rng) {
    if (input_dim == 0 || hidden == 0) throw ShapeError("lstm dimensions must be positive");
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    const auto h4 = static_cast<Eigen::Index>(4 * hidden);
    p.W.resize(h4, static_cast<Eigen::Index>(input_dim));
    p.U.resize(h4, static_cast<Eigen::Index>(hidden));
    p.b.resize(h4);
    const double s = 1.0 / std::sqrt(static_cast<double>(hidden));
    detail::fill_uniform(p.W, s, rng);
    detail::fill_uniform(p.U, s, rng);
    detail::fill_uniform(p.b, s, rng);
    p.bias(Gate::kForget).setConstant(1.0);
    return p;
  }

  static LstmParams zeros(std::size_t input_dim, std::size_t hidden) {
    LstmParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.W = Mat::Zero(static_cast<Eigen::Index>(4 * hidden), static_cast<Eigen::Index>(input_dim));
    p.U = Mat::Zero(static_cast<Eigen::Index>(4 * hidden), static_cast<Eigen::Index>(hidden));
    p.b = Vec::Zero(static_cast<Eigen::Index>(4 * hidden));
    return p;
  }

  auto input_weights(Gate g) { return W.middleRows(offset(g), h()); }
  auto input_weights(Gate g) const { return W.middleRows(offset(g), h()); }
  auto recurrent_weights(Gate g) { return U.middleRows(offset(g), h()); }
  auto recurrent_weights(Gate g) const { return U.middleRows(offset(g), h()); }
  auto bias(Gate g) { return b.segment(offset(g), h()); }
  auto bias(Gate g) const { return b.segment(offset(g), h()); }

  std::size_t num_parameters() const {
    return static_cast<std::size_t>(W.size() + U.size() + b.size());
  }

  void check_shape() const {
    const auto h4 = static_cast<Eigen::Index>(4 * hidden);
    if (W.rows() != h4 || W.cols() != static_cast<Eigen::Index>(input_dim) || U.rows() != h4 ||
        U.cols() != static_cast<Eigen::Index>(hidden) || b.size() != h4)
      throw ShapeError("lstm parameters inconsistent with declared shape");
  }

private:
  Eigen::Index h() const { return static_cast<Eigen::Index>(hidden); }
  Eigen::Index offset(Gate g) const { return static_cast<Eigen::Index>(g) * h(); }
};

struct LstmState {
  Vec h;
  Vec c;

  static LstmState zero(std::size_t hidden) {
    return {Vec::Zero(static_cast<Eigen::Index>(hidden)),
            Vec::Zero(static_cast<Eigen::Index>(hidden))};
  }
};

namespace detail {

struct LstmStepCache {
  Vec x, h_prev, c_prev;
  Vec i, f, o, g;
  Vec c, tanh_c;
};

inline LstmState lstm_step(const LstmParams& p, const LstmState& s, const Vec& x,
                           LstmStepCache* cache) {
  const auto h = static_cast<Eigen::Index>(p.hidden);
  if (x.size() != static_cast<Eigen::Index>(p.input_dim))
    throw ShapeError("step_recurrent: frame dimension " + std::to_string(x.size()) +
                     ", expected " + std::to_string(p.input_dim));
  if (s.h.size() != h || s.c.size() != h)
    throw ShapeError("step_recurrent: state dimension mismatch");
  const Vec z = p.W * x + p.U * s.h + p.b;
  Vec i = z.segment(0, h).unaryExpr(&sigmoid);
  Vec f = z.segment(h, h).unaryExpr(&sigmoid);
  Vec o = z.segment(2 * h, h).unaryExpr(&sigmoid);
  Vec g = z.segment(3 * h, h).array().tanh().matrix();
  LstmState next;
  next.c = (f.array() * s.c.array() + i.array() * g.array()).matrix();
  Vec tanh_c = next.c.array().tanh().matrix();
  next.h = (o.array() * tanh_c.array()).matrix();
  if (cache) {
    cache->x = x;
    cache->h_prev = s.h;
    cache->c_prev = s.c;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->o = std::move(o);
    cache->g = std::move(g);
    cache->c = next.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

}  // namespace detail

/// One LSTM cell application. The current descriptor is the returned `h`.
inline LstmState step_recurrent(const LstmParams& params, const LstmState& state,
                                const Vec& frame) {
  params.check_shape();
  return detail::lstm_step(params, state, frame, nullptr);
}

struct RecurrentOutput {
  Vec descriptor;
  LstmState state;
};

/// Runs the cell over `frames` from a zero state; the descriptor is h_n.
inline RecurrentOutput compose_recurrent(const LstmParams& params, std::span<const Vec> frames) {
  params.check_shape();
  if (frames.empty()) throw ShapeError("compose_recurrent: empty sequence");
  auto state = LstmState::zero(params.hidden);
  for (const auto& x : frames) state = detail::lstm_step(params, state, x, nullptr);
  return {state.h, state};
}

struct LstmGrad {
  Mat dW;
  Mat dU;
  Vec db;
  std::vector<Vec> d_frames;
};

/// Backpropagation through time from a gradient on the final hidden state.
inline LstmGrad grad_recurrent(const LstmParams& params, std::span<const Vec> frames,
                               const Vec& upstream) {
  params.check_shape();
  if (frames.empty()) throw ShapeError("grad_recurrent: empty sequence");
  const auto h = static_cast<Eigen::Index>(params.hidden);
  if (upstream.size() != h)
    throw ShapeError("grad_recurrent: upstream gradient has dimension " +
                     std::to_string(upstream.size()));

  std::vector<detail::LstmStepCache> caches(frames.size());
  auto state = LstmState::zero(params.hidden);
  for (std::size_t t = 0; t < frames.size(); ++t)
    state = detail::lstm_step(params, state, frames[t], &caches[t]);

  LstmGrad g;
  g.dW = Mat::Zero(params.W.rows(), params.W.cols());
  g.dU = Mat::Zero(params.U.rows(), params.U.cols());
  g.db = Vec::Zero(params.b.size());
  g.d_frames.resize(frames.size());

  Vec dh = upstream;
  Vec dc = Vec::Zero(h);
  Vec dz(4 * h);
  for (std::size_t t = frames.size(); t-- > 0;) {
    const auto& k = caches[t];
    const auto tc = k.tanh_c.array();
    dc.array() += dh.array() * k.o.array() * (1.0 - tc.square());
    dz.segment(0, h) = (dc.array() * k.g.array() * k.i.array() * (1.0 - k.i.array())).matrix();
    dz.segment(h, h) =
        (dc.array() * k.c_prev.array() * k.f.array() * (1.0 - k.f.array())).matrix();
    dz.segment(2 * h, h) = (dh.array() * tc * k.o.array() * (1.0 - k.o.array())).matrix();
    dz.segment(3 * h, h) = (dc.array() * k.i.array() * (1.0 - k.g.array().square())).matrix();

    g.dW.noalias() += dz * k.x.transpose();
    g.dU.noalias() += dz * k.h_prev.transpose();
    g.db += dz;
    g.d_frames[t] = params.W.transpose() * dz;
    dh = params.U.transpose() * dz;
    dc = (dc.array() * k.f.array()).matrix();
  }
  return g;
}

// ---------------------------------------------------------------------------

/// A trained (or initialised) composer of any kind.
using ComposerModel = std::variant<GroupingModel, FusionParams, LstmParams>;

inline ComposerKind kind_of(const ComposerModel& model) {
  switch (model.index()) {
    case 0: return ComposerKind::kGrouping;
    case 1: return ComposerKind::kFusion;
    default: return ComposerKind::kRecurrent;
  }
}

inline std::size_t input_dim(const ComposerModel& model) {
  if (auto g = std::get_if<GroupingModel>(&model)) return g->head.input_dim;
  if (auto f = std::get_if<FusionParams>(&model)) return f->input_dim;
  return std::get<LstmParams>(model).input_dim;
}

/// Descriptor size produced for an n-frame window.
inline std::size_t descriptor_dim(const ComposerModel& model, std::size_t n) {
  if (auto g = std::get_if<GroupingModel>(&model)) return n * g->head.output_dim;
  if (auto f = std::get_if<FusionParams>(&model)) return f->output_dim;
  return std::get<LstmParams>(model).hidden;
}

/// Composes one window of backbone vectors with any composer.
inline Vec describe(const ComposerModel& model, std::span<const Vec> frames) {
  if (auto g = std::get_if<GroupingModel>(&model)) return g->compose(frames);
  if (auto f = std::get_if<FusionParams>(&model)) return compose_fusion(*f, frames);
  return compose_recurrent(std::get<LstmParams>(model), frames).descriptor;
}

}  // namespace seqvpr
