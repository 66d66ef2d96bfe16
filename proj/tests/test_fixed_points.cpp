#include <doctest.h>

#include <cmath>

#include "ermlab/fixed_points.hpp"
#include "ermlab/rng.hpp"
#include "oracles.hpp"

using namespace ermlab;

TEST_CASE("query validation") {
  CHECK_NOTHROW(FixedPointQuery::s_star(10, 1.0).validate());
  CHECK_THROWS_AS(FixedPointQuery::s_star(0, 1.0).validate(), ArgumentError);
  CHECK_THROWS_AS(FixedPointQuery::s_star(10, 0.0).validate(), ArgumentError);
  CHECK_THROWS_AS(FixedPointQuery::r_star(10, -1.0).validate(), ArgumentError);
  CHECK_THROWS_AS(FixedPointQuery::r_k(0, 1.0).validate(), ArgumentError);
  CHECK(FixedPointQuery::s_star(100, 2.0).target(0.5) == doctest::Approx(2.0 * 0.25 * 10.0));
  CHECK(FixedPointQuery::r_star(100, 2.0).target(0.5) == doctest::Approx(2.0 * 0.5 * 10.0));
  CHECK(FixedPointQuery::r_k(9, 2.0).target(0.5) == doctest::Approx(2.0 * 0.5 * 3.0));
}

TEST_CASE("log grid") {
  const auto g = log_grid(0.01, 1.0, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == doctest::Approx(0.01));
  CHECK(g[1] == doctest::Approx(0.1));
  CHECK(g[2] == doctest::Approx(1.0));
  CHECK(log_grid(0.01, 1.0, 1) == std::vector<double>{1.0});
}

TEST_CASE("l2 profile matches min(2, r) E|g|") {
  const int d = 6, trials = 4000;
  const auto grid = log_grid(0.1, 4.0, 6);
  const auto prof = width_profile(ConvexBody::l2(d), grid, trials, 8);
  REQUIRE(prof.size() == grid.size());
  for (const auto& e : prof) {
    CHECK(std::abs(e.mean - std::min(2.0, e.r) * oracle::chi_mean(d)) <= 3.0 * e.std_error);
  }
  for (std::size_t i = 1; i < prof.size(); ++i) CHECK(prof[i].mean >= prof[i - 1].mean - 3.0 * prof[i].std_error);
  CHECK(width_profile(ConvexBody::l2(d), {0.5}, 10, 1).size() == 1);

  WidthProfile profile(ConvexBody::l1(32), 200, 4);
  profile.evaluate(log_grid(0.01, 2.0, 15));
  CHECK_NOTHROW(profile.check_monotone());
}

TEST_CASE("s_star for the l2 ball solves the linear branch") {
  const int d = 16, N = 10000;
  WidthProfile profile(ConvexBody::l2(d), 400, 21);
  const auto res = solve_fixed_point(profile, FixedPointQuery::s_star(N, 1.0));
  CHECK(res.converged);
  CHECK_FALSE(res.clipped);
  CHECK(res.residual <= std::max(2.0 * res.std_error, 1e-6));
  // H(r) = r * m on the linear branch with m the sample mean of |g|.
  const double m = profile.at(1.0).mean;
  const double se = profile.at(1.0).std_error;
  CHECK(std::abs(res.value - m / std::sqrt(N)) <= 3.0 * res.std_error / std::sqrt(N) + 1e-3 * 2.0);
  CHECK(std::abs(res.value - oracle::chi_mean(d) / std::sqrt(N)) <= 3.0 * se / std::sqrt(N) + 2e-3);
}

TEST_CASE("fixed point limits") {
  const ConvexBody body = ConvexBody::l1(64);
  const auto big = solve_fixed_point(body, FixedPointQuery::s_star(100, 1e8), 100, 1);
  CHECK_FALSE(big.clipped);
  CHECK(big.floored);
  CHECK(big.value == doctest::Approx(1e-4 * body.diameter()));

  const auto tiny = solve_fixed_point(body, FixedPointQuery::s_star(1, 1e-3), 100, 1);
  CHECK(tiny.clipped);
  CHECK(tiny.value == doctest::Approx(body.diameter()));
}

TEST_CASE("s_star is nonincreasing in eta") {
  WidthProfile profile(ConvexBody::l1(64), 400, 5);
  double prev = INFINITY;
  for (double eta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto res = solve_fixed_point(profile, FixedPointQuery::s_star(256, eta));
    CHECK(res.value <= prev);
    prev = res.value;
  }
}

TEST_CASE("l1 s_star squared tracks the log-corrected rate") {
  const int d = 64;
  WidthProfile profile(ConvexBody::l1(d), 400, 9);
  for (int N : {32, 128, 512, 2048}) {
    const auto res = solve_fixed_point(profile, FixedPointQuery::s_star(N, 1.0));
    const double ref = std::sqrt(std::log(std::exp(1.0) * d * d / N) / N);
    const double ratio = res.value * res.value / ref;
    CHECK(ratio >= 1.0 / 3.0);
    CHECK(ratio <= 3.0);
    CHECK(res.residual <= std::max(2.0 * res.std_error, 1e-6));
  }
}

TEST_CASE("r_star, r_k and q_star") {
  WidthProfile profile(ConvexBody::l1(64), 400, 2);
  const auto r1 = solve_fixed_point(profile, FixedPointQuery::r_star(16, 1.0));
  const auto r2 = solve_fixed_point(profile, FixedPointQuery::r_star(64, 1.0));
  CHECK(r2.value <= r1.value);
  const auto rk = solve_fixed_point(profile, FixedPointQuery::r_k(16, 1.0));
  CHECK(rk.value == doctest::Approx(r1.value));

  const auto q = solve_fixed_point(ConvexBody::l2(4), FixedPointQuery::q_star(50, 1.0), 100, 3);
  CHECK_FALSE(q.note.empty());
  CHECK(q.value > 0.0);
}

TEST_CASE("k_star") {
  const int trials = 4000;
  const auto w = global_width_mc(ConvexBody::l2(4), trials, 6);
  const double Q = 0.3, dF = 2.0;
  const double lo = std::pow((w.mean - 3 * w.std_error) / (Q * dF), 2);
  const double hi = std::pow((w.mean + 3 * w.std_error) / (Q * dF), 2);
  const int k = k_star(ConvexBody::l2(4), Q, trials, 6);
  CHECK(k >= static_cast<int>(std::ceil(lo)));
  CHECK(k <= static_cast<int>(std::ceil(hi)));
  CHECK(std::abs(w.mean - oracle::chi_mean(4)) <= 3 * w.std_error);
  CHECK(k_star(ConvexBody::l2(4), 1e6, 100, 6) == 1);
  int prev = 1 << 30;
  for (double q : {0.1, 0.2, 0.5, 1.0, 2.0}) {
    const int kq = k_star(ConvexBody::l1(32), q, 200, 7);
    CHECK(kq <= prev);
    prev = kq;
  }
}

TEST_CASE("predicted rate regimes") {
  const ConvexBody body = ConvexBody::l1(64);
  WidthProfile profile(body, 400, 1);
  const RateConstants c;
  const auto quiet = predicted_rate(profile, 32, 0.0, c);
  CHECK(quiet.regime == Regime::low_noise);
  CHECK(std::isnan(quiet.s_star));
  CHECK(quiet.rate == doctest::Approx(quiet.r_star * quiet.r_star));

  const auto loud = predicted_rate(profile, 32, 100.0, c);
  CHECK(loud.regime == Regime::noisy);
  CHECK(loud.rate == doctest::Approx(loud.s_star * loud.s_star));
}

TEST_CASE("max-norm rate is close to sigma sqrt((p+q)/N)") {
  const int p = 6, q = 6;
  const ConvexBody body = ConvexBody::maxnorm(p, q, 1.0 / 6.0);
  WidthProfile profile(body, 400, 3);
  for (int N : {50, 200, 800}) {
    const auto pred = predicted_rate(profile, N, 1.0, RateConstants{});
    const double ref = std::sqrt(static_cast<double>(p + q) / N);
    CHECK(pred.regime == Regime::noisy);
    CHECK(pred.rate / ref >= 1.0 / 3.0);
    CHECK(pred.rate / ref <= 3.0);
  }
}
