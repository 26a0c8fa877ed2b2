#pragma once

// Wohlhart-Lepetit triplet loss:
//   L = max{0, 1 - |a - n| / (m + |a - p|)}

#include <algorithm>
#include <cmath>
#include <string>

#include "seqvpr/composer.hpp"

namespace seqvpr {

namespace detail {

/// max{0, x} that keeps NaN visible, so divergence is not masked as a zero loss.
inline double hinge(double x) { return std::isnan(x) ? x : std::max(0.0, x); }

inline void check_triplet(const Vec& a, const Vec& p, const Vec& n, double margin) {
  if (a.size() != p.size() || a.size() != n.size())
    throw ShapeError("wl_loss: descriptor dimensions differ (" + std::to_string(a.size()) + ", " +
                     std::to_string(p.size()) + ", " + std::to_string(n.size()) + ")");
  if (!(margin > 0.0)) throw ConfigError("wl_loss: margin must be positive");
}

}  // namespace detail

inline double wl_loss(const Vec& anchor, const Vec& positive, const Vec& negative,
                      double margin) {
  detail::check_triplet(anchor, positive, negative, margin);
  const double dn = (anchor - negative).norm();
  const double dp = (anchor - positive).norm();
  return detail::hinge(1.0 - dn / (margin + dp));
}

struct WlLossGrad {
  double loss = 0.0;
  Vec d_anchor;
  Vec d_positive;
  Vec d_negative;
};

/// Loss and its gradient w.r.t. the three descriptors. The gradient is zero
/// whenever the hinge is not strictly active; a zero distance contributes a
/// zero direction.
inline WlLossGrad wl_loss_grad(const Vec& anchor, const Vec& positive, const Vec& negative,
                               double margin) {
  detail::check_triplet(anchor, positive, negative, margin);
  const Vec to_neg = anchor - negative;
  const Vec to_pos = anchor - positive;
  const double dn = to_neg.norm();
  const double dp = to_pos.norm();
  const double denom = margin + dp;

  WlLossGrad g;
  g.loss = detail::hinge(1.0 - dn / denom);
  const auto dim = anchor.size();
  g.d_anchor = Vec::Zero(dim);
  g.d_positive = Vec::Zero(dim);
  g.d_negative = Vec::Zero(dim);
  if (!(g.loss > 0.0)) return g;

  const Vec u_neg = dn > 0.0 ? Vec(to_neg / dn) : Vec::Zero(dim);
  const Vec u_pos = dp > 0.0 ? Vec(to_pos / dp) : Vec::Zero(dim);
  // dL/d(dn) = -1/denom, dL/d(dp) = dn/denom^2
  const double wn = -1.0 / denom;
  const double wp = dn / (denom * denom);
  g.d_anchor = wn * u_neg + wp * u_pos;
  g.d_negative = -wn * u_neg;
  g.d_positive = -wp * u_pos;
  return g;
}

}  // namespace seqvpr
