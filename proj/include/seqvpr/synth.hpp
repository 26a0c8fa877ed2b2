#pragma once

// Synthetic multi-condition worlds and the reverse / random-speed perturbations.
//
// Place p has a latent unit vector z_p, optionally correlated with z_{p-1}
// (an isotropic random walk, so every z_p remains uniform on the sphere).
// Condition c observes it as
//   x = A_c z_p + b_c + eps,   A_c = I + transform_scale * R_c,
// with R_c ~ N(0, 1/D) entries, b_c ~ N(0, offset_scale^2 / D) entries and
// eps ~ N(0, noise^2 I). Frame i of every traversal shows place i.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "seqvpr/core.hpp"

namespace seqvpr {

struct WorldConfig {
  std::size_t num_places = 200;
  std::size_t dim = 64;
  std::size_t conditions = 2;
  double transform_scale = 0.5;
  double noise = 0.1;
  /// Scale of the per-condition offset; negative means "same as transform_scale".
  double offset_scale = -1.0;
  std::uint64_t rng_seed = 0;
  /// Correlation between consecutive place vectors along the route, in [0, 1).
  /// Each z_p stays uniform on the sphere; 0 gives independent places.
  double temporal_correlation = 0.0;
  /// Window length the world must support (num_places >= 2 * window).
  std::size_t window = 3;

  double effective_offset_scale() const { return offset_scale < 0.0 ? transform_scale : offset_scale; }

  void validate() const {
    if (window == 0 || num_places < 2 * window)
      throw ConfigError("num_places must be at least twice the window length");
    if (dim < 2) throw ConfigError("dim must be at least 2");
    if (conditions < 2) throw ConfigError("at least two conditions are required");
    if (!(transform_scale >= 0.0) || !(noise >= 0.0) || !std::isfinite(transform_scale) ||
        !std::isfinite(noise) || !std::isfinite(offset_scale))
      throw ConfigError("scales must be finite and non-negative");
    if (!(temporal_correlation >= 0.0 && temporal_correlation < 1.0))
      throw ConfigError("temporal_correlation must lie in [0, 1)");
  }
};

inline FeatureStore generate_world(const WorldConfig& cfg) {
  cfg.validate();
  const auto D = static_cast<Eigen::Index>(cfg.dim);
  const auto P = cfg.num_places;

  std::vector<Eigen::VectorXd> places(P);
  {
    std::seed_seq seq{cfg.rng_seed, std::uint64_t{0x9ace}};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double rho = cfg.temporal_correlation;
    const double step = std::sqrt((1.0 - rho * rho) / static_cast<double>(cfg.dim));
    for (std::size_t p = 0; p < P; ++p) {
      auto& z = places[p];
      z.resize(D);
      do {
        for (Eigen::Index i = 0; i < D; ++i) z[i] = normal(rng);
        if (p > 0 && rho > 0.0) z = rho * places[p - 1] + step * z;
      } while (z.norm() == 0.0);
      z.normalize();
    }
  }

  FeatureStore store;
  store.dim = cfg.dim;
  for (std::size_t c = 0; c < cfg.conditions; ++c) {
    std::seed_seq seq{cfg.rng_seed, std::uint64_t{0xc0d}, std::uint64_t{c}};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(D, D);
    const double r_sd = cfg.transform_scale / std::sqrt(static_cast<double>(cfg.dim));
    for (Eigen::Index j = 0; j < D; ++j)
      for (Eigen::Index i = 0; i < D; ++i) A(i, j) += r_sd * normal(rng);
    Eigen::VectorXd offset(D);
    const double b_sd = cfg.effective_offset_scale() / std::sqrt(static_cast<double>(cfg.dim));
    for (Eigen::Index i = 0; i < D; ++i) offset[i] = b_sd * normal(rng);

    Traversal t;
    t.condition_id = static_cast<std::uint32_t>(c);
    t.name = "condition_" + std::to_string(c);
    t.frames.resize(P);
    for (std::size_t p = 0; p < P; ++p) {
      Eigen::VectorXd x = A * places[p] + offset;
      for (Eigen::Index i = 0; i < D; ++i) x[i] += cfg.noise * normal(rng);
      auto& f = t.frames[p];
      f.frame_id = static_cast<std::uint32_t>(p);
      f.condition_id = t.condition_id;
      f.features.resize(cfg.dim);
      for (Eigen::Index i = 0; i < D; ++i) f.features[static_cast<std::size_t>(i)] = static_cast<float>(x[i]);
    }
    store.traversals.push_back(std::move(t));
  }
  return store;
}

/// Splits every traversal at frame position `first`: frames [0, first) form
/// the first store, the rest the second, with frame ids rebased to start at 0.
/// Both stores keep the same conditions.
inline std::pair<FeatureStore, FeatureStore> split_places(const FeatureStore& store,
                                                          std::size_t first) {
  FeatureStore a, b;
  a.dim = b.dim = store.dim;
  a.convention = b.convention = store.convention;
  for (const auto& t : store.traversals) {
    if (first > t.size()) throw ConfigError("split point beyond traversal length");
    Traversal ta{t.condition_id, t.name, {}}, tb{t.condition_id, t.name, {}};
    ta.frames.assign(t.frames.begin(), t.frames.begin() + static_cast<std::ptrdiff_t>(first));
    tb.frames.assign(t.frames.begin() + static_cast<std::ptrdiff_t>(first), t.frames.end());
    for (auto& f : tb.frames) f.frame_id -= static_cast<std::uint32_t>(first);
    a.traversals.push_back(std::move(ta));
    b.traversals.push_back(std::move(tb));
  }
  return {std::move(a), std::move(b)};
}

/// Plays one condition backwards. Frame ids travel with their content, so the
/// ground-truth correspondence is unchanged.
inline FeatureStore perturb_reverse(FeatureStore store, std::uint32_t condition_id) {
  auto& t = store.condition(condition_id);
  std::reverse(t.frames.begin(), t.frames.end());
  return store;
}

/// Re-samples one condition as if driven at a random speed: starting at the
/// first frame, each step advances by a multiplier drawn uniformly from
/// `multipliers`. Skipped frames are dropped.
template <class Rng>
FeatureStore perturb_speed(FeatureStore store, std::uint32_t condition_id,
                           const std::vector<std::size_t>& multipliers, Rng& rng) {
  if (multipliers.empty()) throw ConfigError("perturb_speed: no multipliers");
  for (auto m : multipliers)
    if (m == 0) throw ConfigError("perturb_speed: multipliers must be positive");
  auto& t = store.condition(condition_id);
  std::uniform_int_distribution<std::size_t> pick(0, multipliers.size() - 1);
  std::vector<FeatureFrame> kept;
  for (std::size_t pos = 0; pos < t.frames.size(); pos += multipliers[pick(rng)])
    kept.push_back(std::move(t.frames[pos]));
  t.frames = std::move(kept);
  return store;
}

/// frame_id -> place_id table per condition.
inline nlohmann::json ground_truth_json(const FeatureStore& store) {
  nlohmann::json out;
  out["tolerance"] = store.convention.tolerance;
  out["conditions"] = nlohmann::json::array();
  for (const auto& t : store.traversals) {
    nlohmann::json table = nlohmann::json::object();
    for (const auto& f : t.frames) table[std::to_string(f.frame_id)] = f.frame_id;
    out["conditions"].push_back(
        {{"condition_id", t.condition_id}, {"name", t.name}, {"place_of_frame", table}});
  }
  return out;
}

}  // namespace seqvpr
