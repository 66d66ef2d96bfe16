#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ermlab/widths.hpp"

namespace ermlab {

enum class FixedPointKind { s_star, r_star, r_k, q_star };

std::string to_string(FixedPointKind kind);

struct FixedPointQuery {
  FixedPointKind kind = FixedPointKind::s_star;
  int N = 1;
  double eta = 0.0;  // s_star, q_star
  double Q = 0.0;    // r_star, r_k
  int k = 0;         // r_k

  static FixedPointQuery s_star(int N, double eta) { return {FixedPointKind::s_star, N, eta, 0.0, 0}; }
  static FixedPointQuery r_star(int N, double Q) { return {FixedPointKind::r_star, N, 0.0, Q, 0}; }
  static FixedPointQuery r_k(int k, double Q) { return {FixedPointKind::r_k, 1, 0.0, Q, k}; }
  static FixedPointQuery q_star(int N, double eta) { return {FixedPointKind::q_star, N, eta, 0.0, 0}; }

  /// Throws ArgumentError unless exactly the parameters of `kind` are set.
  void validate() const;
  double target(double r) const;
};

struct FixedPointResult {
  double value = 0.0;
  double residual = 0.0;  // |H(value) - target(value)|
  double lo = 0.0;
  double hi = 0.0;
  bool clipped = false;  // the defining set was empty; value = d_F(L2)
  bool floored = false;  // the condition already holds at the r_min floor
  bool converged = false;
  double std_error = 0.0;  // of H(value)
  int evaluations = 0;
  std::string note;  // e.g. "packing lower-bound proxy" for q_star
};

struct SolverConfig {
  double floor_fraction = 1e-4;    // r_min = floor_fraction * d_F(L2)
  double bracket_fraction = 1e-3;  // bracket width at which interpolation kicks in
  int max_iter = 200;
  int packing_budget = 4000;  // q_star covering proxy
  WidthConfig width{};
};

/// Memoized r -> E sup_{2T ∩ rB_2} <G, t>, evaluated on one fixed gaussian
/// sample so the profile is exactly monotone and star-shaped per draw.
class WidthProfile {
 public:
  WidthProfile(const ConvexBody& body, int trials, std::uint64_t seed, const WidthConfig& cfg = {});

  const WidthEstimate& at(double r);
  std::vector<WidthEstimate> evaluate(const std::vector<double>& grid);

  /// Checks that H is nondecreasing and H(r)/r nonincreasing over every cached
  /// radius, within 3 standard errors. Throws NumericalError otherwise.
  void check_monotone() const;

  const ConvexBody& body() const { return body_; }
  double diameter() const { return body_.diameter(); }
  std::uint64_t seed() const { return seed_; }
  int trials() const { return sample_.trials(); }

 private:
  ConvexBody body_;
  WidthConfig cfg_;
  std::uint64_t seed_;
  GaussianSample sample_;
  std::map<double, WidthEstimate> cache_;
};

/// n log-spaced radii over [lo, hi] (n = 1 gives {hi}).
std::vector<double> log_grid(double lo, double hi, int n);

std::vector<WidthEstimate> width_profile(const ConvexBody& body, const std::vector<double>& grid,
                                         int trials, std::uint64_t seed,
                                         const WidthConfig& cfg = {});

/// Bisection on the sign of H(r) - target(r) over [r_min, d_F(L2)].
FixedPointResult solve_fixed_point(WidthProfile& profile, const FixedPointQuery& query,
                                   const SolverConfig& cfg = {});

FixedPointResult solve_fixed_point(const ConvexBody& body, const FixedPointQuery& query, int trials,
                                   std::uint64_t seed, const SolverConfig& cfg = {});

/// r * sqrt(log M), with M a packing lower bound of body ∩ 2r B_2 at scale 2r
/// (so M <= N(body ∩ 2r B_2, r B_2)).
double covering_complexity(const ConvexBody& body, double r, int budget, std::uint64_t seed);

/// ceil((E|G|_F / (Q d_F(L2)))^2), at least 1.
int k_star(const ConvexBody& body, double Q, int trials, std::uint64_t seed,
           const WidthConfig& cfg = {});

struct RateConstants {
  double c1 = 1.0;  // eta = c1 / sigma
  double c3 = 1.0;  // regime threshold sigma >= c3 r*
  double Q = 1.0;
};

enum class Regime { noisy, low_noise };
std::string to_string(Regime regime);

struct RatePrediction {
  double rate = 0.0;
  Regime regime = Regime::low_noise;
  double s_star = 0.0;  // NaN when sigma = 0
  double r_star = 0.0;
  FixedPointResult s_result;
  FixedPointResult r_result;
};

RatePrediction predicted_rate(WidthProfile& profile, int N, double sigma,
                              const RateConstants& constants, const SolverConfig& cfg = {});

RatePrediction predicted_rate(const ConvexBody& body, int N, double sigma,
                              const RateConstants& constants, int trials, std::uint64_t seed,
                              const SolverConfig& cfg = {});

}  // namespace ermlab
