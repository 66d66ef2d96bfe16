#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ermlab/erm.hpp"
#include "ermlab/geometry.hpp"
#include "ermlab/sim.hpp"
#include "ermlab/widths.hpp"

namespace ermlab {

/// Standard normal CDF and its inverse (bisection on the CDF, |error| < 1e-12).
double normal_cdf(double x);
double normal_quantile(double p);

struct RatioQuery {
  double lambda = 0.0;
  int directions = 64;     // random starting points
  int ascent_steps = 200;  // hill-climbing steps per start
  double step0 = 0.25;     // initial relative step size of the climb

  void validate() const;
};

/// Precomputed sample moments for the ratio statistic of a linear class.
class RatioStatistic {
 public:
  RatioStatistic(const ConvexBody& body, const Dataset& data, const Model& model);

  /// PL_t in closed form (isotropic design).
  double population(const Vector& t) const;
  /// |P_N L_t / PL_t - 1|.
  double operator()(const Vector& t) const;

  const Vector& f_star() const { return f_star_; }
  /// sup_{t in body} PL_t, attained at a support point of the body.
  double max_population() const;

 private:
  ConvexBody body_;
  Matrix S_;
  Vector c_;
  Vector t0_;
  Vector f_star_;
  double f_star_emp_ = 0.0;  // P_N of the f* loss part
  double f_star_gap_ = 0.0;  // |f* - t0|^2
};

/// Lower bound on sup_{t in body, PL_t >= lambda} |P_N L_t / PL_t - 1| by
/// multi-start local search. Throws NumericalError if no class member has
/// PL_t >= lambda.
double ratio_sup_estimate(const RatioQuery& query, const ConvexBody& body, const Dataset& data,
                          const Model& model, std::uint64_t seed);

struct IsomorphicCheck {
  bool holds = false;
  double worst_ratio = 0.0;
};

IsomorphicCheck isomorphic_event_check(const ConvexBody& body, const Dataset& data,
                                       const Model& model, double lambda, int directions,
                                       std::uint64_t seed);

/// 1 - Phi(Phi^{-1}(1 - alpha) + shift).
double gaussian_shift_bound(double alpha, double shift);

/// min(c1 sigma^2 log(1/delta) / N, d_F^2 / 4).
double accuracy_confidence_lower(double sigma, int N, double delta, double d_F, double c1 = 1.0);

using Estimator = std::function<Vector(const Dataset&)>;

struct TwoPointDemo {
  double reported_error = 0.0;  // max(|f0 - h1|, |f0 - h2|)
  double lower_bound = 0.0;     // |h1 - h2| / 2
  Vector h1;
  Vector h2;
  Vector estimate;
};

/// h1 = argmax of the kernel-section search, h2 = -h1. Both hypotheses
/// produce the same sample Y = X h + V, so one estimator run answers both.
TwoPointDemo two_point_minimax_demo(const Estimator& estimator, const ConvexBody& body,
                                    const Matrix& X, double sigma, std::uint64_t noise_seed,
                                    const SectionConfig& section = {});

struct CurveRow {
  double delta = 0.0;
  double quantile = 0.0;     // empirical (1 - delta) quantile of the excess risk
  double lower_bound = 0.0;  // accuracy_confidence_lower
};

/// (1 - delta) quantiles of the excess risk over `trials` independent datasets
/// (type 7 interpolation).
std::vector<CurveRow> confidence_accuracy_curve(const Estimator& estimator, const ConvexBody& body,
                                                const Model& model, int N, int trials,
                                                const std::vector<double>& deltas,
                                                std::uint64_t seed, double c1 = 1.0);

/// Type 7 sample quantile.
double quantile(std::vector<double> values, double prob);

}  // namespace ermlab
