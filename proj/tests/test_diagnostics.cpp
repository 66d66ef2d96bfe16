#include <doctest.h>

#include <cmath>

#include "ermlab/diagnostics.hpp"
#include "ermlab/erm.hpp"
#include "ermlab/harness.hpp"
#include "ermlab/rng.hpp"
#include "oracles.hpp"

using namespace ermlab;

TEST_CASE("normal cdf and quantile") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  for (double p : {1e-6, 0.01, 0.3, 0.5, 0.9, 0.999}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
}

TEST_CASE("gaussian shift bound") {
  for (double a : {0.01, 0.2, 0.5, 0.9}) CHECK(gaussian_shift_bound(a, 0.0) == doctest::Approx(a).epsilon(1e-10));
  CHECK(gaussian_shift_bound(0.5, 1.95996) == doctest::Approx(oracle::upper_tail(1.95996)).epsilon(1e-9));
  CHECK(gaussian_shift_bound(0.5, 1.95996) == doctest::Approx(0.025).epsilon(1e-4));
  double prev = 1.0;
  for (double s : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const double v = gaussian_shift_bound(0.3, s);
    CHECK(v <= prev);
    prev = v;
  }
  prev = 0.0;
  for (double a : {0.05, 0.1, 0.4, 0.8}) {
    const double v = gaussian_shift_bound(a, 1.0);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK_THROWS_AS(gaussian_shift_bound(1.5, 0.0), ArgumentError);
  CHECK_THROWS_AS(gaussian_shift_bound(0.5, -1.0), ArgumentError);
}

TEST_CASE("accuracy-confidence lower bound") {
  CHECK(accuracy_confidence_lower(1.0, 100, 1.0, 2.0) == 0.0);
  CHECK(accuracy_confidence_lower(0.0, 100, 0.1, 2.0) == 0.0);
  CHECK(accuracy_confidence_lower(1.0, 100, std::exp(-1.0), 2.0) == doctest::Approx(0.01));
  CHECK(accuracy_confidence_lower(1.0, 100, std::exp(-1.0), 2.0, 3.0) == doctest::Approx(0.03));
  CHECK(accuracy_confidence_lower(10.0, 1, 1e-9, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("type 7 quantile") {
  CHECK(quantile({1, 2, 3, 4}, 0.3) == doctest::Approx(1.9));
  CHECK(quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({5}, 0.9) == 5.0);
  CHECK(quantile({1, 2, 3}, 1.0) == 3.0);
}

TEST_CASE("ratio statistic concentrates at a fixed member") {
  const int d = 6;
  Vector t0 = Vector::Zero(d);
  t0[0] = 0.2;
  const Model model{DesignSpec::make(DesignKind::gaussian, d), NoiseSpec{NoiseKind::gaussian_noise, 1.0}, t0};
  const ConvexBody body = ConvexBody::l1(d);
  Vector f = Vector::Zero(d);
  f[1] = 0.6;
  f[2] = -0.3;
  double prev = INFINITY;
  for (int N : {200, 20000, 400000}) {
    const auto data = sample_dataset(model, N, 4);
    const RatioStatistic stat(body, data, model);
    CHECK(stat.f_star() == t0);
    CHECK(stat.population(f) == doctest::Approx((f - t0).squaredNorm()));
    const double v = stat(f);
    CHECK(v <= prev * 1.5);
    prev = v;
  }
  CHECK(prev < 0.02);
}

TEST_CASE("ratio search guards") {
  const Model model{DesignSpec::make(DesignKind::gaussian, 4), NoiseSpec{NoiseKind::orthogonal_target, 1.0}, std::nullopt};
  const auto data = sample_dataset(model, 10, 1);
  const RatioStatistic stat(ConvexBody::l1(4), data, model);
  CHECK(stat.max_population() == doctest::Approx(1.0));
  RatioQuery q;
  q.lambda = 2.0;
  CHECK_THROWS_AS(ratio_sup_estimate(q, ConvexBody::l1(4), data, model, 1), NumericalError);
  q.lambda = 0.0;
  CHECK_THROWS_AS(q.validate(), ArgumentError);
  q.lambda = 0.2;
  const double v = ratio_sup_estimate(q, ConvexBody::l1(4), data, model, 1);
  CHECK(v >= 0.0);
  CHECK(v == ratio_sup_estimate(q, ConvexBody::l1(4), data, model, 1));
}

TEST_CASE("isomorphic event holds for realizable data with many samples") {
  const int d = 8;
  Vector t = Vector::Zero(d);
  t[0] = 0.5;
  const Model model{DesignSpec::make(DesignKind::gaussian, d), NoiseSpec{NoiseKind::gaussian_noise, 0.0}, t};
  const auto data = sample_dataset(model, 4000, 2);
  const auto check = isomorphic_event_check(ConvexBody::l1(d), data, model, 0.05, 32, 3);
  CHECK(check.holds);
  CHECK(check.worst_ratio <= 0.5);
}

TEST_CASE("two-point demo") {
  const ConvexBody body = ConvexBody::l1(8);
  Rng rng(10);
  Matrix X(4, 8);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.gaussian();

  const auto zero = two_point_minimax_demo([](const Dataset& d) { return Vector(Vector::Zero(d.dim())); }, body, X, 0.5, 1);
  CHECK(zero.reported_error == doctest::Approx(zero.h1.norm()));
  CHECK(zero.lower_bound == doctest::Approx(zero.h1.norm()));
  CHECK((zero.h1 + zero.h2).norm() == 0.0);
  CHECK((X * zero.h1).norm() <= 1e-9);

  const Vector h1 = zero.h1;
  const auto oracle_est = two_point_minimax_demo([&](const Dataset&) { return h1; }, body, X, 0.5, 1);
  CHECK(oracle_est.reported_error == doctest::Approx((oracle_est.h1 - oracle_est.h2).norm()));
  CHECK(oracle_est.reported_error >= oracle_est.lower_bound);

  const Estimator erm = [&](const Dataset& d) { return erm_linear(body, d).t_hat; };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto res = two_point_minimax_demo(erm, body, X, 0.5, seed);
    CHECK(res.reported_error >= res.lower_bound - 1e-9);
  }

  Matrix tall(10, 8);
  for (Eigen::Index i = 0; i < tall.size(); ++i) tall.data()[i] = rng.gaussian();
  CHECK_THROWS_AS(two_point_minimax_demo(erm, body, tall, 0.5, 1), NumericalError);
}

TEST_CASE("confidence-accuracy curve") {
  const ConvexBody body = ConvexBody::l1(16);
  const Model model{DesignSpec::make(DesignKind::gaussian, 16), NoiseSpec{NoiseKind::gaussian_noise, 1.0},
                    Vector(Vector::Zero(16))};
  const Estimator erm = [&](const Dataset& d) { return erm_linear(body, d).t_hat; };
  const auto rows = confidence_accuracy_curve(erm, body, model, 32, 60, {0.5, 0.1, 0.02}, 5);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].quantile <= rows[1].quantile);
  CHECK(rows[1].quantile <= rows[2].quantile);
  for (const auto& r : rows) CHECK(r.lower_bound == doctest::Approx(accuracy_confidence_lower(1.0, 32, r.delta, 2.0)));

  // The delta = 0.5 column is the median of the same excess risks.
  std::vector<double> risks;
  for (int t = 0; t < 60; ++t) {
    const auto data = sample_dataset(model, 32, derive_seed(5, "curve", static_cast<std::uint64_t>(t)));
    risks.push_back(excess_risk(erm(data), model).value);
  }
  CHECK(rows[0].quantile == doctest::Approx(quantile(risks, 0.5)));
}

TEST_CASE("confidence curve stays within a frozen factor of the lower bound") {
  const auto cfg = preset("b1_rates");
  const ConvexBody body = cfg.body_for(64);
  const Model model{DesignSpec::make(DesignKind::gaussian, 64), NoiseSpec{NoiseKind::gaussian_noise, 1.0},
                    Vector(Vector::Zero(64))};
  const Estimator erm = [&](const Dataset& d) { return erm_linear(body, d).t_hat; };
  const auto rows = confidence_accuracy_curve(erm, body, model, 128, 200, {0.5, 0.1, 0.02}, 9);
  const FlatConfig frozen = load_constants();
  const double hi = parse::real("acceptance.curve_ratio_hi", frozen.at("acceptance.curve_ratio_hi"));
  for (const auto& r : rows) {
    CHECK(r.quantile / r.lower_bound <= hi);
  }
}
