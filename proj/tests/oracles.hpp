#pragma once

// Reference computations used by the unit and acceptance tests. They are
// written without calling the library routines they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ermlab/geometry.hpp"

namespace oracle {

using ermlab::BodyKind;
using ermlab::ConvexBody;
using ermlab::Vector;

// Dual-norm support function of the l1, l2 and linf balls.
inline double support(const ConvexBody& body, const Vector& g) {
  switch (body.kind) {
    case BodyKind::l1_ball: return body.radius * g.cwiseAbs().maxCoeff();
    case BodyKind::l2_ball: return body.radius * g.norm();
    case BodyKind::linf_ball: return body.radius * g.cwiseAbs().sum();
    default: return NAN;
  }
}

inline double norm(const ConvexBody& body, const Vector& x) {
  switch (body.kind) {
    case BodyKind::l1_ball: return x.cwiseAbs().sum();
    case BodyKind::l2_ball: return x.norm();
    case BodyKind::linf_ball: return x.cwiseAbs().maxCoeff();
    default: return NAN;
  }
}

// Variational-inequality residual of y as the projection of x:
// sup_{z in T} <x - y, z - y>, zero exactly at the projection.
inline double projection_residual(const ConvexBody& body, const Vector& x, const Vector& y) {
  const Vector w = x - y;
  return oracle::support(body, w) - w.dot(y);
}

// sup <g, t> over B_1 ∩ r B_2 in R^3 by grid search over the positive face
// of the simplex (after folding signs), with one local refinement pass.
inline double l1_l2_support_grid(const Vector& g_in, double r) {
  Vector g = g_in.cwiseAbs();
  auto value = [&](double a, double b) {
    const double c = 1.0 - a - b;
    if (a < 0 || b < 0 || c < -1e-15) return -1.0;
    const double w0 = a, w1 = b, w2 = std::max(c, 0.0);
    const double nrm = std::sqrt(w0 * w0 + w1 * w1 + w2 * w2);
    const double s = std::min(1.0, r / nrm);
    return s * (g[0] * w0 + g[1] * w1 + g[2] * w2);
  };
  const int n = 400;
  double best = -1.0, ba = 0.0, bb = 0.0;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) {
      const double a = static_cast<double>(i) / n, b = static_cast<double>(j) / n;
      const double v = value(a, b);
      if (v > best) best = v, ba = a, bb = b;
    }
  }
  const double half = 2.0 / n, step = 2.5e-5;
  const double a0 = ba, b0 = bb;
  for (double a = std::max(0.0, a0 - half); a <= a0 + half; a += step) {
    for (double b = std::max(0.0, b0 - half); b <= b0 + half; b += step) {
      const double v = value(a, b);
      if (v > best) best = v;
    }
  }
  // Faces with a zero coordinate are covered by the clamped window above only
  // if the coarse optimum sits there; scan the three edges finely as well.
  for (int e = 0; e < 3; ++e) {
    for (int i = 0; i <= 40000; ++i) {
      const double a = i / 40000.0;
      const double v = e == 0 ? value(a, 0.0) : e == 1 ? value(0.0, a) : value(a, 1.0 - a);
      if (v > best) best = v;
    }
  }
  return best;
}

// Mean of the chi distribution with k degrees of freedom.
inline double chi_mean(int k) {
  return std::sqrt(2.0) * std::exp(std::lgamma((k + 1) / 2.0) - std::lgamma(k / 2.0));
}

// Greedy Gilbert-Varshamov over all k-subsets of {0..d-1} in lexicographic
// order with pairwise symmetric difference >= k/2, written from scratch with
// bitmasks.
inline int gv_greedy_count(int d, int k) {
  std::vector<unsigned> chosen;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  const int need = (k + 1) / 2;
  while (true) {
    unsigned mask = 0;
    for (int i : idx) mask |= 1u << i;
    bool ok = true;
    for (unsigned m : chosen) {
      if (__builtin_popcount(m ^ mask) < need) {
        ok = false;
        break;
      }
    }
    if (ok) chosen.push_back(mask);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == d - k + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
  return static_cast<int>(chosen.size());
}

// Standard normal upper tail through the complementary error function.
inline double upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace oracle
