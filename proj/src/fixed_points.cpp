#include "ermlab/fixed_points.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace ermlab {

std::string to_string(FixedPointKind kind) {
  switch (kind) {
    case FixedPointKind::s_star: return "s_star";
    case FixedPointKind::r_star: return "r_star";
    case FixedPointKind::r_k: return "r_k";
    case FixedPointKind::q_star: return "q_star";
  }
  return "unknown";
}

std::string to_string(Regime regime) {
  return regime == Regime::noisy ? "noisy" : "low_noise";
}

void FixedPointQuery::validate() const {
  const bool uses_eta = kind == FixedPointKind::s_star || kind == FixedPointKind::q_star;
  if (uses_eta) {
    if (!(eta > 0.0)) throw ArgumentError(to_string(kind) + ": eta must be positive");
    if (Q != 0.0 || k != 0) throw ArgumentError(to_string(kind) + ": only N and eta may be set");
  } else {
    if (!(Q > 0.0)) throw ArgumentError(to_string(kind) + ": Q must be positive");
    if (eta != 0.0) throw ArgumentError(to_string(kind) + ": eta must not be set");
  }
  if (kind == FixedPointKind::r_k) {
    if (k < 1) throw ArgumentError("r_k: k must be >= 1");
  } else {
    if (N < 1) throw ArgumentError(to_string(kind) + ": N must be >= 1");
    if (k != 0) throw ArgumentError(to_string(kind) + ": k must not be set");
  }
}

double FixedPointQuery::target(double r) const {
  switch (kind) {
    case FixedPointKind::s_star:
    case FixedPointKind::q_star: return eta * r * r * std::sqrt(static_cast<double>(N));
    case FixedPointKind::r_star: return Q * r * std::sqrt(static_cast<double>(N));
    case FixedPointKind::r_k: return Q * r * std::sqrt(static_cast<double>(k));
  }
  return 0.0;
}

WidthProfile::WidthProfile(const ConvexBody& body, int trials, std::uint64_t seed,
                           const WidthConfig& cfg)
    : body_(body), cfg_(cfg), seed_(seed), sample_(body.dim, trials, seed) {
  if (trials < 2) throw ArgumentError("WidthProfile: trials must be >= 2");
}

const WidthEstimate& WidthProfile::at(double r) {
  auto it = cache_.find(r);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(r, localized_width(body_, r, sample_, cfg_)).first->second;
}

std::vector<WidthEstimate> WidthProfile::evaluate(const std::vector<double>& grid) {
  std::vector<WidthEstimate> out;
  out.reserve(grid.size());
  for (double r : grid) out.push_back(at(r));
  return out;
}

void WidthProfile::check_monotone() const {
  const WidthEstimate* prev = nullptr;
  for (const auto& [r, est] : cache_) {
    if (prev && prev->r > 0.0 && r > 0.0) {
      const double slack = 3.0 * std::max(prev->std_error, est.std_error);
      if (est.mean < prev->mean - slack) {
        throw NumericalError("width profile decreases between r=" + std::to_string(prev->r) +
                             " and r=" + std::to_string(r));
      }
      if (est.mean / r > prev->mean / prev->r + slack / prev->r) {
        throw NumericalError("width profile H(r)/r increases between r=" +
                             std::to_string(prev->r) + " and r=" + std::to_string(r));
      }
    }
    prev = &est;
  }
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw ArgumentError("log_grid: need n >= 1, 0 < lo <= hi");
  if (n == 1) return {hi};
  std::vector<double> grid(static_cast<std::size_t>(n));
  const double step = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) grid[i] = lo * std::exp(step * i);
  grid.back() = hi;
  return grid;
}

std::vector<WidthEstimate> width_profile(const ConvexBody& body, const std::vector<double>& grid,
                                         int trials, std::uint64_t seed, const WidthConfig& cfg) {
  WidthProfile profile(body, trials, seed, cfg);
  auto out = profile.evaluate(grid);
  return out;
}

namespace {

struct Evaluation {
  double h = 0.0;  // H(r) - target(r)
  double tol = 0.0;
  double std_error = 0.0;
};

FixedPointResult bisect(const std::function<Evaluation(double)>& eval, double r_min, double r_max,
                        const SolverConfig& cfg, bool residual_stop) {
  FixedPointResult out;
  const Evaluation top = eval(r_max);
  ++out.evaluations;
  if (top.h > 0.0) {
    out.value = out.lo = out.hi = r_max;
    out.residual = std::abs(top.h);
    out.std_error = top.std_error;
    out.clipped = true;
    out.converged = true;
    return out;
  }
  const Evaluation bottom = eval(r_min);
  ++out.evaluations;
  if (bottom.h <= 0.0) {
    out.value = out.lo = out.hi = r_min;
    out.residual = std::abs(bottom.h);
    out.std_error = bottom.std_error;
    out.floored = true;
    out.converged = true;
    return out;
  }

  double lo = r_min;
  double hi = r_max;
  double h_lo = bottom.h;
  double h_hi = top.h;
  const double width_tol = cfg.bracket_fraction * r_max;
  for (int it = 0; it < cfg.max_iter; ++it) {
    double mid;
    if (hi - lo <= width_tol) {
      mid = lo + (hi - lo) * h_lo / (h_lo - h_hi);  // regula falsi inside a tight bracket
      if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    } else {
      mid = hi / lo > 2.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    }
    const Evaluation e = eval(mid);
    ++out.evaluations;
    out.value = mid;
    out.residual = std::abs(e.h);
    out.std_error = e.std_error;
    if (e.h <= 0.0) {
      hi = mid;
      h_hi = e.h;
    } else {
      lo = mid;
      h_lo = e.h;
    }
    out.lo = lo;
    out.hi = hi;
    if (residual_stop && out.residual <= e.tol) {
      out.converged = true;
      return out;
    }
    if (!residual_stop && hi - lo <= width_tol) {
      out.value = hi;
      out.converged = true;
      return out;
    }
  }
  if (!residual_stop) out.value = hi;
  return out;
}

}  // namespace

double covering_complexity(const ConvexBody& body, double r, int budget, std::uint64_t seed) {
  const int m = packing_lower(body, 2.0 * r, 2.0 * r, budget, seed);
  return r * std::sqrt(std::log(static_cast<double>(m)));
}

FixedPointResult solve_fixed_point(WidthProfile& profile, const FixedPointQuery& query,
                                   const SolverConfig& cfg) {
  query.validate();
  const double r_max = profile.diameter();
  const double r_min = cfg.floor_fraction * r_max;

  if (query.kind == FixedPointKind::q_star) {
    const ConvexBody body = profile.body();
    const std::uint64_t seed = derive_seed(profile.seed(), "q_star");
    auto eval = [&](double r) {
      Evaluation e;
      e.h = covering_complexity(body, r, cfg.packing_budget, seed) - query.target(r);
      return e;
    };
    auto out = bisect(eval, r_min, r_max, cfg, false);
    out.note = "packing lower-bound proxy for the covering numbers";
    return out;
  }

  auto eval = [&](double r) {
    const WidthEstimate& w = profile.at(r);
    Evaluation e;
    e.h = w.mean - query.target(r);
    e.std_error = w.std_error;
    e.tol = std::max(2.0 * w.std_error, 1e-6);
    return e;
  };
  auto out = bisect(eval, r_min, r_max, cfg, true);
  profile.check_monotone();
  return out;
}

FixedPointResult solve_fixed_point(const ConvexBody& body, const FixedPointQuery& query, int trials,
                                   std::uint64_t seed, const SolverConfig& cfg) {
  WidthProfile profile(body, trials, seed, cfg.width);
  return solve_fixed_point(profile, query, cfg);
}

int k_star(const ConvexBody& body, double Q, int trials, std::uint64_t seed,
           const WidthConfig& cfg) {
  if (!(Q > 0.0)) throw ArgumentError("k_star: Q must be positive");
  const WidthEstimate w = global_width_mc(body, trials, seed, cfg);
  const double ratio = w.mean / (Q * body.diameter());
  return std::max(1, static_cast<int>(std::ceil(ratio * ratio)));
}

RatePrediction predicted_rate(WidthProfile& profile, int N, double sigma,
                              const RateConstants& constants, const SolverConfig& cfg) {
  if (sigma < 0.0) throw ArgumentError("predicted_rate: sigma must be nonnegative");
  RatePrediction out;
  out.r_result = solve_fixed_point(profile, FixedPointQuery::r_star(N, constants.Q), cfg);
  out.r_star = out.r_result.value;
  if (sigma == 0.0) {
    out.s_star = std::numeric_limits<double>::quiet_NaN();
    out.regime = Regime::low_noise;
    out.rate = out.r_star * out.r_star;
    return out;
  }
  out.s_result = solve_fixed_point(profile, FixedPointQuery::s_star(N, constants.c1 / sigma), cfg);
  out.s_star = out.s_result.value;
  if (sigma >= constants.c3 * out.r_star) {
    out.regime = Regime::noisy;
    out.rate = out.s_star * out.s_star;
  } else {
    out.regime = Regime::low_noise;
    out.rate = out.r_star * out.r_star;
  }
  return out;
}

RatePrediction predicted_rate(const ConvexBody& body, int N, double sigma,
                              const RateConstants& constants, int trials, std::uint64_t seed,
                              const SolverConfig& cfg) {
  WidthProfile profile(body, trials, seed, cfg.width);
  return predicted_rate(profile, N, sigma, constants, cfg);
}

}  // namespace ermlab
