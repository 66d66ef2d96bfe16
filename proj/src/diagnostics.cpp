#include "ermlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ermlab/parallel.hpp"
#include "ermlab/rng.hpp"

namespace ermlab {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal_quantile: p must lie in (0, 1)");
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    // Compare in the tail that keeps precision.
    const bool below = p < 0.5 ? normal_cdf(mid) < p : 0.5 * std::erfc(mid / std::sqrt(2.0)) > 1.0 - p;
    if (below) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

void RatioQuery::validate() const {
  if (!(lambda > 0.0)) throw ArgumentError("ratio query: lambda must be positive");
  if (directions < 1) throw ArgumentError("ratio query: directions must be >= 1");
  if (ascent_steps < 0) throw ArgumentError("ratio query: ascent_steps must be >= 0");
}

RatioStatistic::RatioStatistic(const ConvexBody& body, const Dataset& data, const Model& model)
    : body_(body) {
  data.validate();
  model.validate();
  if (body.kind == BodyKind::maxnorm_ball) {
    throw UnsupportedError("ratio statistic needs a projectable body");
  }
  if (body.dim != data.dim() || body.dim != model.design.d) {
    throw DimensionError("ratio statistic: body, data and model dimensions differ");
  }
  if (data.N() < 1) throw ArgumentError("ratio statistic: empty dataset");
  const double n = data.N();
  S_ = data.X.transpose() * data.X / n;
  c_ = data.X.transpose() * data.Y / n;
  t0_ = model.regression_vector();
  f_star_ = project(body, t0_);
  f_star_emp_ = f_star_.dot(S_ * f_star_) - 2.0 * c_.dot(f_star_);
  f_star_gap_ = (f_star_ - t0_).squaredNorm();
}

double RatioStatistic::population(const Vector& t) const {
  return (t - t0_).squaredNorm() - f_star_gap_;
}

double RatioStatistic::operator()(const Vector& t) const {
  const double pl = population(t);
  const double emp = t.dot(S_ * t) - 2.0 * c_.dot(t) - f_star_emp_;
  return std::abs(emp / pl - 1.0);
}

double RatioStatistic::max_population() const {
  double far = 0.0;
  switch (body_.kind) {
    case BodyKind::l1_ball: {
      for (Eigen::Index i = 0; i < t0_.size(); ++i) {
        const double rest = t0_.squaredNorm() - t0_[i] * t0_[i];
        const double edge = body_.radius + std::abs(t0_[i]);
        far = std::max(far, rest + edge * edge);
      }
      break;
    }
    case BodyKind::l2_ball: far = std::pow(body_.radius + t0_.norm(), 2); break;
    case BodyKind::linf_ball:
      far = (t0_.array().abs() + body_.radius).square().sum();
      break;
    case BodyKind::maxnorm_ball: throw UnsupportedError("ratio statistic needs a projectable body");
  }
  return far - f_star_gap_;
}

namespace {

// Moves t along the segment from f* so that PL lands on `level`; PL is
// increasing along such segments because f* is the projection of t0.
Vector place_on_level(const RatioStatistic& stat, const Vector& t, double level) {
  const Vector u = t - stat.f_star();
  const double full = stat.population(t);
  if (full <= level) return t;
  // PL(f* + a u) = a * b + a^2 * |u|^2 with b = PL(t) - |u|^2.
  const double uu = u.squaredNorm();
  const double b = full - uu;
  const double a = (-b + std::sqrt(b * b + 4.0 * uu * level)) / (2.0 * uu);
  return stat.f_star() + std::clamp(a, 0.0, 1.0) * u;
}

Vector ratio_gradient(const Vector& t, const Matrix& S, const Vector& c, const Vector& t0,
                      double emp, double pl) {
  const Vector g_emp = 2.0 * (S * t - c);
  const Vector g_pl = 2.0 * (t - t0);
  return (g_emp - (emp / pl) * g_pl) / pl;
}

}  // namespace

double ratio_sup_estimate(const RatioQuery& query, const ConvexBody& body, const Dataset& data,
                          const Model& model, std::uint64_t seed) {
  query.validate();
  const RatioStatistic stat(body, data, model);
  if (query.lambda > stat.max_population()) {
    throw NumericalError("ratio_sup_estimate: no class member has PL_f >= lambda (lambda = " +
                         std::to_string(query.lambda) + ", max PL_f = " +
                         std::to_string(stat.max_population()) + ")");
  }
  const double n = data.N();
  const Matrix S = data.X.transpose() * data.X / n;
  const Vector c = data.X.transpose() * data.Y / n;
  const Vector t0 = model.regression_vector();
  const double f_emp = stat.f_star().dot(S * stat.f_star()) - 2.0 * c.dot(stat.f_star());

  const IntersectionSampler sampler(body, body.diameter());
  std::vector<double> best(static_cast<std::size_t>(query.directions), 0.0);
  std::vector<char> found(best.size(), 0);

  parallel_for(best.size(), [&](std::size_t m) {
    Rng rng(seed, "ratio_start", m);
    Vector t;
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      Vector cand = sampler(rng);
      if (stat.population(cand) < query.lambda) continue;
      const double level = query.lambda * (1.0 + 3.0 * rng.uniform());
      t = place_on_level(stat, cand, level);
      ok = stat.population(t) >= query.lambda * (1.0 - 1e-12);
    }
    if (!ok) return;
    found[m] = 1;
    double value = stat(t);
    double step = query.step0 * std::sqrt(query.lambda);
    for (int s = 0; s < query.ascent_steps && step > 1e-12; ++s) {
      const double pl = stat.population(t);
      const double emp = t.dot(S * t) - 2.0 * c.dot(t) - f_emp;
      Vector dir = ratio_gradient(t, S, c, t0, emp, pl);
      if (emp / pl < 1.0) dir = -dir;
      const double nd = dir.norm();
      if (nd == 0.0) break;
      const Vector cand = project(body, t + (step / nd) * dir);
      if (stat.population(cand) >= query.lambda) {
        const double v = stat(cand);
        if (v > value) {
          value = v;
          t = cand;
          step *= 1.5;
          continue;
        }
      }
      step *= 0.5;
    }
    best[m] = value;
  });

  if (std::none_of(found.begin(), found.end(), [](char f) { return f != 0; })) {
    throw NumericalError("ratio_sup_estimate: no sampled class member reached PL_f >= lambda");
  }
  return *std::max_element(best.begin(), best.end());
}

IsomorphicCheck isomorphic_event_check(const ConvexBody& body, const Dataset& data,
                                       const Model& model, double lambda, int directions,
                                       std::uint64_t seed) {
  RatioQuery q;
  q.lambda = lambda;
  q.directions = directions;
  IsomorphicCheck out;
  out.worst_ratio = ratio_sup_estimate(q, body, data, model, seed);
  out.holds = out.worst_ratio <= 0.5;
  return out;
}

double gaussian_shift_bound(double alpha, double shift) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("gaussian_shift_bound: alpha must lie in (0, 1)");
  if (!(shift >= 0.0)) throw ArgumentError("gaussian_shift_bound: shift must be nonnegative");
  const double z = normal_quantile(1.0 - alpha);
  return 0.5 * std::erfc((z + shift) / std::sqrt(2.0));
}

double accuracy_confidence_lower(double sigma, int N, double delta, double d_F, double c1) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ArgumentError("accuracy_confidence_lower: delta must lie in (0, 1]");
  if (N < 1) throw ArgumentError("accuracy_confidence_lower: N must be >= 1");
  if (sigma < 0.0 || d_F < 0.0 || c1 < 0.0) {
    throw ArgumentError("accuracy_confidence_lower: sigma, d_F and c1 must be nonnegative");
  }
  return std::min(c1 * sigma * sigma * std::log(1.0 / delta) / N, 0.25 * d_F * d_F);
}

TwoPointDemo two_point_minimax_demo(const Estimator& estimator, const ConvexBody& body,
                                    const Matrix& X, double sigma, std::uint64_t noise_seed,
                                    const SectionConfig& section) {
  if (X.cols() != body.dim) throw DimensionError("two_point_minimax_demo: design and body dims differ");
  const SectionDiameter sd = kernel_section_diameter(body, X, section);
  if (!(sd.diameter > 0.0)) throw NumericalError("two_point_minimax_demo: trivial kernel section");

  TwoPointDemo out;
  out.h1 = sd.argmax;
  out.h2 = -sd.argmax;
  Dataset data;
  data.X = X;
  Rng rng(noise_seed, "two_point_noise");
  Vector noise(X.rows());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = sigma * rng.gaussian();
  // X h1 = X h2 = 0 up to round-off, so both hypotheses give this sample.
  data.Y = X * out.h1 + noise;
  data.meta.sigma = sigma;
  data.meta.seed = noise_seed;

  out.estimate = estimator(data);
  if (out.estimate.size() != body.dim) throw DimensionError("two_point_minimax_demo: estimator output dim");
  out.reported_error = std::max((out.estimate - out.h1).norm(), (out.estimate - out.h2).norm());
  out.lower_bound = 0.5 * (out.h1 - out.h2).norm();
  if (out.reported_error < out.lower_bound - 1e-9) {
    throw NumericalError("two_point_minimax_demo: reported error below the two-point bound");
  }
  return out;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw ArgumentError("quantile: empty input");
  if (!(prob >= 0.0 && prob <= 1.0)) throw ArgumentError("quantile: prob must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

std::vector<CurveRow> confidence_accuracy_curve(const Estimator& estimator, const ConvexBody& body,
                                                const Model& model, int N, int trials,
                                                const std::vector<double>& deltas,
                                                std::uint64_t seed, double c1) {
  if (trials < 1) throw ArgumentError("confidence_accuracy_curve: trials must be >= 1");
  model.validate();
  std::vector<double> risks(static_cast<std::size_t>(trials));
  parallel_for(risks.size(), [&](std::size_t i) {
    const Dataset data = sample_dataset(model, N, derive_seed(seed, "curve", i));
    risks[i] = excess_risk(estimator(data), model).value;
  });
  std::vector<CurveRow> rows;
  for (double delta : deltas) {
    CurveRow row;
    row.delta = delta;
    row.quantile = quantile(risks, 1.0 - delta);
    row.lower_bound = accuracy_confidence_lower(model.noise.sigma, N, delta, body.diameter(), c1);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ermlab
