#include <doctest.h>

#include <cmath>

#include "ermlab/rng.hpp"
#include "ermlab/widths.hpp"
#include "oracles.hpp"

using namespace ermlab;

TEST_CASE("width at radius zero is zero") {
  const auto w = gaussian_width_mc(ConvexBody::l1(16), 0.0, 10, 1);
  CHECK(w.mean == 0.0);
  CHECK(w.std_error == 0.0);
  CHECK_THROWS_AS(gaussian_width_mc(ConvexBody::l1(16), 1.0, 1, 1), ArgumentError);
  CHECK_THROWS_AS(gaussian_width_mc(ConvexBody::l1(16), -1.0, 10, 1), ArgumentError);
}

TEST_CASE("l2 width matches the chi mean") {
  const auto w = gaussian_width_mc(ConvexBody::l2(2), 3.0, 4000, 17);
  const double target = 2.0 * oracle::chi_mean(2);
  CHECK(target == doctest::Approx(2.5066).epsilon(1e-4));
  CHECK(std::abs(w.mean - target) <= 3.0 * w.std_error);

  // On the linear branch the profile is r * E|g|.
  const auto small = gaussian_width_mc(ConvexBody::l2(9), 0.5, 4000, 18);
  CHECK(std::abs(small.mean - 0.5 * oracle::chi_mean(9)) <= 3.0 * small.std_error);
}

TEST_CASE("widths are reproducible per seed") {
  const auto a = gaussian_width_mc(ConvexBody::l1(32), 0.4, 50, 99);
  const auto b = gaussian_width_mc(ConvexBody::l1(32), 0.4, 50, 99);
  const auto c = gaussian_width_mc(ConvexBody::l1(32), 0.4, 50, 100);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  CHECK(a.mean != c.mean);
}

TEST_CASE("global width of the l1 ball is E max |g_i|") {
  const int d = 4;
  const auto w = global_width_mc(ConvexBody::l1(d), 4000, 3);
  // E max_i |g_i| by numerical integration of 1 - (2 Phi(x) - 1)^d.
  double expect = 0.0;
  const double h = 1e-4;
  for (double x = h / 2; x < 12.0; x += h) {
    const double inside = 1.0 - 2.0 * oracle::upper_tail(x);
    expect += (1.0 - std::pow(inside, d)) * h;
  }
  CHECK(std::abs(w.mean - expect) <= 3.0 * w.std_error);
}

TEST_CASE("max-norm atom width against an independent brute force") {
  const int p = 3, q = 3, trials = 3000;
  const auto w = maxnorm_atom_width(p, q, trials, 5);
  Rng rng(12345);
  double sum = 0.0, sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector g = rng.gaussian_vector(p * q) / std::sqrt(static_cast<double>(p * q));
    double best = -1e300;
    for (int su = 0; su < 1 << p; ++su) {
      for (int sv = 0; sv < 1 << q; ++sv) {
        double v = 0.0;
        for (int i = 0; i < p; ++i) {
          for (int j = 0; j < q; ++j) v += ((su >> i & 1) ? -1.0 : 1.0) * g[i * q + j] * ((sv >> j & 1) ? -1.0 : 1.0);
        }
        best = std::max(best, v);
      }
    }
    sum += best;
    sq += best * best;
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sq / trials - mean * mean) / trials);
  CHECK(std::abs(w.mean - mean) <= 4.0 * std::hypot(se, w.std_error));
}

TEST_CASE("intersection sampler stays inside") {
  Rng rng(4);
  for (auto body : {ConvexBody::l1(12), ConvexBody::l2(12, 2.0), ConvexBody::linf(12, 0.5)}) {
    IntersectionSampler sampler(body, 0.7);
    for (int i = 0; i < 500; ++i) {
      const Vector t = sampler(rng);
      CHECK(t.norm() <= 0.7 + 1e-9);
      CHECK(oracle::norm(body, t) <= body.radius + 1e-9);
    }
  }
}

TEST_CASE("packing lower bounds") {
  CHECK(packing_lower(ConvexBody::l2(2), 1.0, 2.5, 500, 1) == 1);
  CHECK(packing_lower(ConvexBody::l2(2), 1.0, 0.5, 4000, 1) >= 12);

  // The sparse construction is itself a separated subset of the body.
  const SeparatedSet set = build_sparse_separated_set(8, 2);
  const int packed = packing_lower(ConvexBody::l1(8), set.scale, set.guaranteed_separation, 4000, 2);
  CHECK(packed >= static_cast<int>(set.points.size()));
}

TEST_CASE("covering upper bounds") {
  CHECK(covering_upper(ConvexBody::l2(2), 1.0, 2.0, 500, 1).count == 1);
  // Hexagonal cover: the center plus six disks centred at radius sqrt(3)/2
  // cover the unit disk with eps = 1, so N <= 7.
  const CoverEstimate cover = covering_upper(ConvexBody::l2(2), 1.0, 1.0, 4000, 3);
  CHECK(cover.count <= 7);
  {
    Rng rng(2);
    int missed = 0;
    for (int i = 0; i < 20000; ++i) {
      const double a = 2.0 * M_PI * rng.uniform(), rad = std::sqrt(rng.uniform());
      const double x = rad * std::cos(a), y = rad * std::sin(a);
      bool hit = std::hypot(x, y) <= 1.0;
      for (int k = 0; k < 6 && !hit; ++k) {
        const double c = std::sqrt(3.0) / 2.0, b = k * M_PI / 3.0 + M_PI / 6.0;
        hit = std::hypot(x - c * std::cos(b), y - c * std::sin(b)) <= 1.0;
      }
      missed += hit ? 0 : 1;
    }
    CHECK(missed == 0);
  }
  for (double eps : {0.3, 0.5}) {
    const int cov = covering_upper(ConvexBody::l2(2), 1.0, eps, 4000, 4).count;
    const int pack = packing_lower(ConvexBody::l2(2), 1.0, 2.0 * eps, 4000, 4);
    CHECK(cov >= pack);
  }
}

TEST_CASE("sparse separated sets") {
  const SeparatedSet four = build_sparse_separated_set(4, 1);
  CHECK(four.points.size() == 4);
  CHECK(four.separation == doctest::Approx(std::sqrt(2.0)));

  const SeparatedSet s16 = build_sparse_separated_set(16, 4);
  CHECK(s16.points.size() >= 8);
  CHECK(static_cast<int>(s16.points.size()) == oracle::gv_greedy_count(16, 4));
  CHECK(s16.separation >= s16.guaranteed_separation - 1e-12);
  for (const auto& p : s16.points) {
    CHECK(p.cwiseAbs().sum() <= 1.0 + 1e-12);
    CHECK(p.norm() <= s16.scale + 1e-12);
  }

  const SeparatedSet s64 = build_sparse_separated_set(64, 8);
  CHECK(s64.log_size >= 0.2 * 8 * std::log(std::exp(1.0) * 64 / 8));

  CHECK_THROWS_AS(build_sparse_separated_set(8, 3), ArgumentError);
  CHECK_THROWS_AS(build_sparse_separated_set(8, 0), ArgumentError);
}

TEST_CASE("kernel section diameter") {
  const ConvexBody body = ConvexBody::l1(8);
  CHECK(kernel_section_diameter(body, Matrix(0, 8)).diameter == doctest::Approx(2.0));

  Rng rng(21);
  Matrix full(10, 8);
  for (Eigen::Index i = 0; i < full.size(); ++i) full.data()[i] = rng.gaussian();
  CHECK(kernel_section_diameter(body, full).diameter == 0.0);

  for (int rep = 0; rep < 5; ++rep) {
    Matrix x(4, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.gaussian();
    SectionConfig exact_cfg;
    exact_cfg.method = SectionMethod::vertex_enum;
    const auto exact = kernel_section_diameter(body, x, exact_cfg);
    const auto approx = kernel_section_diameter(body, x);
    CHECK(exact.kernel_dim == 4);
    CHECK(approx.diameter <= exact.diameter * (1 + 1e-9));
    CHECK(approx.diameter >= 0.9 * exact.diameter);
    CHECK((x * exact.argmax).norm() <= 1e-9);
    CHECK(exact.argmax.cwiseAbs().sum() <= 1.0 + 1e-9);
  }
  SectionConfig bad;
  bad.method = SectionMethod::vertex_enum;
  CHECK_THROWS_AS(kernel_section_diameter(ConvexBody::l2(4), Matrix(1, 4), bad), UnsupportedError);
}
