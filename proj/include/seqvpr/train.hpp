#pragma once

// Triplet sampling under the same-place convention and the SGD training loop
// for the learnable composers.

#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqvpr/composer.hpp"
#include "seqvpr/core.hpp"
#include "seqvpr/loss.hpp"

namespace seqvpr {

using Rng = std::mt19937_64;

struct Triplet {
  QuerySequence anchor;
  QuerySequence positive;
  QuerySequence negative;
};

inline constexpr int kMaxSamplingAttempts = 64;

/// Draws an anchor window uniformly from a random condition, a positive window
/// from a different condition that shares a place with it, and a negative
/// window from any condition that does not. The store must outlive the result.
inline Triplet sample_triplet(const FeatureStore& store, std::size_t n, Rng& rng) {
  if (n == 0) throw ConfigError("sample_triplet: n must be positive");
  std::vector<const Traversal*> eligible;
  for (const auto& t : store.traversals)
    if (t.size() >= n) eligible.push_back(&t);
  if (eligible.size() < 2)
    throw SamplingExhausted("sample_triplet: need two conditions with at least " +
                            std::to_string(n) + " frames");

  const auto& conv = store.convention;
  auto pick = [&rng](std::size_t count) {
    return std::uniform_int_distribution<std::size_t>(0, count - 1)(rng);
  };

  std::vector<std::size_t> candidates;
  for (int attempt = 0; attempt < kMaxSamplingAttempts; ++attempt) {
    const auto a_idx = pick(eligible.size());
    const Traversal& a_trav = *eligible[a_idx];
    QuerySequence anchor(a_trav, pick(a_trav.num_windows(n)), n);

    auto p_idx = pick(eligible.size() - 1);
    if (p_idx >= a_idx) ++p_idx;
    const Traversal& p_trav = *eligible[p_idx];
    candidates.clear();
    for (std::size_t s = 0; s < p_trav.num_windows(n); ++s) {
      bool hit = false;
      for (std::size_t k = 0; k < n && !hit; ++k)
        for (auto id : anchor.frame_ids())
          if (conv.same_place(p_trav.frames[s + k].frame_id, id)) {
            hit = true;
            break;
          }
      if (hit) candidates.push_back(s);
    }
    if (candidates.empty()) continue;
    QuerySequence positive(p_trav, candidates[pick(candidates.size())], n);

    for (int neg_attempt = 0; neg_attempt < kMaxSamplingAttempts; ++neg_attempt) {
      const Traversal& n_trav = *eligible[pick(eligible.size())];
      QuerySequence negative(n_trav, pick(n_trav.num_windows(n)), n);
      if (!same_place(anchor, negative, conv))
        return {std::move(anchor), std::move(positive), std::move(negative)};
    }
  }
  throw SamplingExhausted("sample_triplet: no valid positive/negative after " +
                          std::to_string(kMaxSamplingAttempts) + " attempts");
}

struct TrainConfig {
  double margin = 0.1;
  double learning_rate = 1e-3;
  std::size_t epochs = 5;
  std::size_t triplets_per_epoch = 2000;
  std::uint64_t rng_seed = 0;
  double frame_substitution_prob = 0.5;
  double dropout_rate = 0.5;
  std::size_t n = 3;
  /// Size of the single-view head output, the fusion output and the LSTM state.
  std::size_t descriptor_dim = 128;
  FusionOptions fusion;

  void validate() const {
    if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be non-negative");
    if (triplets_per_epoch == 0) throw ConfigError("triplets_per_epoch must be positive");
    if (!(frame_substitution_prob >= 0.0 && frame_substitution_prob <= 1.0))
      throw ConfigError("frame_substitution_prob must lie in [0, 1]");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw ConfigError("dropout_rate must lie in [0, 1)");
    if (n == 0) throw ConfigError("n must be positive");
    if (descriptor_dim == 0) throw ConfigError("descriptor_dim must be positive");
  }
};

/// Deterministic initial parameters for a composer of `kind` over backbone
/// vectors of `input_dim`.
inline ComposerModel initial_model(ComposerKind kind, std::size_t input_dim,
                                   const TrainConfig& config) {
  std::seed_seq seq{config.rng_seed, std::uint64_t{0x1417}};
  Rng rng(seq);
  switch (kind) {
    case ComposerKind::kGrouping:
      return GroupingModel{
          FusionParams::random(1, input_dim, config.descriptor_dim, rng, config.fusion)};
    case ComposerKind::kFusion:
      return FusionParams::random(config.n, input_dim, config.descriptor_dim, rng, config.fusion);
    case ComposerKind::kRecurrent:
      return LstmParams::random(input_dim, config.descriptor_dim, rng);
  }
  throw ConfigError("unknown composer kind");
}

struct TrainResult {
  ComposerModel model;
  std::vector<double> loss_trace;
};

namespace detail {

/// Replaces frames with other observations of the same place.
class FrameSubstituter {
public:
  explicit FrameSubstituter(const FeatureStore& store) : store_(store) {
    positions_.resize(store.traversals.size());
    for (std::size_t c = 0; c < store.traversals.size(); ++c)
      for (std::size_t i = 0; i < store.traversals[c].frames.size(); ++i)
        positions_[c].emplace(store.traversals[c].frames[i].frame_id, i);
  }

  /// Some frame of the place of `original`, other than `original` itself, or
  /// nullptr when the place has a single observation.
  const FeatureFrame* draw(const FeatureFrame& original, Rng& rng) const {
    const auto tol = store_.convention.tolerance;
    const auto lo = original.frame_id >= tol ? original.frame_id - tol : 0u;
    const auto hi = original.frame_id + tol;
    std::vector<const FeatureFrame*> pool;
    for (std::size_t c = 0; c < store_.traversals.size(); ++c)
      for (auto id = lo; id <= hi; ++id) {
        auto it = positions_[c].find(id);
        if (it == positions_[c].end()) continue;
        const auto* f = &store_.traversals[c].frames[it->second];
        if (f->frame_id == original.frame_id && f->condition_id == original.condition_id)
          continue;
        pool.push_back(f);
      }
    if (pool.empty()) return nullptr;
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  }

private:
  const FeatureStore& store_;
  std::vector<std::unordered_map<std::uint32_t, std::size_t>> positions_;
};

inline std::vector<Vec> window_inputs(const QuerySequence& q) {
  std::vector<Vec> out;
  out.reserve(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out.push_back(to_vec(q[i].features));
  return out;
}

}  // namespace detail

/// Runs epochs * triplets_per_epoch SGD steps on the triplet loss, starting
/// from `model`. Grouping trains its single-view head on single-frame triplets.
inline TrainResult train_composer(ComposerModel model, const FeatureStore& store,
                                  const TrainConfig& config) {
  config.validate();
  if (store.traversals.size() < 2) throw ConfigError("training needs at least two conditions");
  if (input_dim(model) != store.dim)
    throw ShapeError("model input dimension " + std::to_string(input_dim(model)) +
                     " does not match store dimension " + std::to_string(store.dim));

  std::seed_seq seq{config.rng_seed, std::uint64_t{0x7a11}};
  Rng rng(seq);
  const auto kind = kind_of(model);
  const std::size_t window = kind == ComposerKind::kGrouping ? 1 : config.n;
  const detail::FrameSubstituter substituter(store);
  std::bernoulli_distribution substitute(config.frame_substitution_prob);
  std::bernoulli_distribution keep(1.0 - config.dropout_rate);
  const double lr = config.learning_rate;

  TrainResult result;
  const std::size_t steps = config.epochs * config.triplets_per_epoch;
  result.loss_trace.reserve(steps);

  for (std::size_t step = 0; step < steps; ++step) {
    const Triplet t = sample_triplet(store, window, rng);
    std::array<std::vector<Vec>, 3> inputs = {detail::window_inputs(t.anchor),
                                              detail::window_inputs(t.positive),
                                              detail::window_inputs(t.negative)};
    const std::array<const QuerySequence*, 3> seqs = {&t.anchor, &t.positive, &t.negative};

    if (kind == ComposerKind::kRecurrent) {
      for (std::size_t s = 0; s < 3; ++s) {
        if (!substitute(rng)) continue;
        const auto k = std::uniform_int_distribution<std::size_t>(0, window - 1)(rng);
        if (const auto* f = substituter.draw((*seqs[s])[k], rng)) inputs[s][k] = to_vec(f->features);
      }
    }

    std::array<Vec, 3> desc;
    std::array<Vec, 3> mask;
    if (auto* g = std::get_if<GroupingModel>(&model)) {
      for (std::size_t s = 0; s < 3; ++s) desc[s] = compose_fusion(g->head, inputs[s]);
    } else if (auto* f = std::get_if<FusionParams>(&model)) {
      for (std::size_t s = 0; s < 3; ++s) desc[s] = compose_fusion(*f, inputs[s]);
    } else {
      auto& p = std::get<LstmParams>(model);
      const double scale = config.dropout_rate > 0.0 ? 1.0 / (1.0 - config.dropout_rate) : 1.0;
      for (std::size_t s = 0; s < 3; ++s) {
        mask[s] = Vec::Constant(static_cast<Eigen::Index>(p.hidden), scale);
        if (config.dropout_rate > 0.0)
          for (Eigen::Index i = 0; i < mask[s].size(); ++i)
            if (!keep(rng)) mask[s][i] = 0.0;
        desc[s] = (compose_recurrent(p, inputs[s]).descriptor.array() * mask[s].array()).matrix();
      }
    }

    const auto lg = wl_loss_grad(desc[0], desc[1], desc[2], config.margin);
    if (!std::isfinite(lg.loss)) throw DivergenceError(step);
    result.loss_trace.push_back(lg.loss);
    if (!(lg.loss > 0.0) || lr == 0.0) continue;
    const std::array<const Vec*, 3> upstream = {&lg.d_anchor, &lg.d_positive, &lg.d_negative};

    auto fusion_update = [&](FusionParams& p) {
      Mat dW = Mat::Zero(p.W.rows(), p.W.cols());
      Vec db = Vec::Zero(p.b.size());
      for (std::size_t s = 0; s < 3; ++s) {
        auto g = grad_fusion(p, inputs[s], *upstream[s]);
        dW += g.dW;
        db += g.db;
      }
      p.W -= lr * dW;
      p.b -= lr * db;
    };

    if (auto* g = std::get_if<GroupingModel>(&model)) {
      fusion_update(g->head);
    } else if (auto* f = std::get_if<FusionParams>(&model)) {
      fusion_update(*f);
    } else {
      auto& p = std::get<LstmParams>(model);
      Mat dW = Mat::Zero(p.W.rows(), p.W.cols());
      Mat dU = Mat::Zero(p.U.rows(), p.U.cols());
      Vec db = Vec::Zero(p.b.size());
      for (std::size_t s = 0; s < 3; ++s) {
        const Vec up = (upstream[s]->array() * mask[s].array()).matrix();
        auto g = grad_recurrent(p, inputs[s], up);
        dW += g.dW;
        dU += g.dU;
        db += g.db;
      }
      p.W -= lr * dW;
      p.U -= lr * dU;
      p.b -= lr * db;
    }
  }
  result.model = std::move(model);
  return result;
}

inline TrainResult train_composer(ComposerKind kind, const FeatureStore& store,
                                  const TrainConfig& config) {
  config.validate();
  return train_composer(initial_model(kind, store.dim, config), store, config);
}

/// CSV with header `step,loss`.
inline std::string loss_trace_csv(const std::vector<double>& trace) {
  std::string out = "step,loss\n";
  char line[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.17g\n", i, trace[i]);
    out += line;
  }
  return out;
}

}  // namespace seqvpr
