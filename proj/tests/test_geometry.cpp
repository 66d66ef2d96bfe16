#include <doctest.h>

#include "ermlab/geometry.hpp"
#include "ermlab/rng.hpp"
#include "oracles.hpp"

using namespace ermlab;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("projection closed forms") {
  CHECK((project(ConvexBody::l2(2), vec({3, 4})) - vec({0.6, 0.8})).norm() < 1e-12);
  CHECK((project(ConvexBody::l1(2), vec({2, 0})) - vec({1, 0})).norm() < 1e-12);
  CHECK((project(ConvexBody::l1(2), vec({0.6, 0.6})) - vec({0.5, 0.5})).norm() < 1e-12);
  CHECK((project(ConvexBody::linf(3), vec({2, -0.5, -7})) - vec({1, -0.5, -1})).norm() < 1e-12);
  const Vector inside = vec({0.1, -0.2, 0.3});
  CHECK((project(ConvexBody::l1(3), inside) - inside).norm() == 0.0);
}

TEST_CASE("projection satisfies the variational inequality") {
  Rng rng(42);
  for (auto body : {ConvexBody::l1(10, 1.5), ConvexBody::l2(10, 0.7), ConvexBody::linf(10, 0.3)}) {
    for (int i = 0; i < 200; ++i) {
      const Vector x = 2.0 * rng.gaussian_vector(10);
      const Vector y = project(body, x);
      CHECK(oracle::norm(body, y) <= body.radius * (1 + 1e-12));
      CHECK(oracle::projection_residual(body, x, y) <= 1e-9);
    }
  }
}

TEST_CASE("projection errors") {
  CHECK_THROWS_AS(project(ConvexBody::l1(3), vec({1, 2})), DimensionError);
  CHECK_THROWS_AS(project(ConvexBody::maxnorm(2, 2), Vector::Zero(4)), UnsupportedError);
}

TEST_CASE("support functions") {
  const auto s1 = support(ConvexBody::l1(2), vec({1, -3}));
  CHECK(s1.value == doctest::Approx(3.0));
  CHECK((s1.argmax - vec({0, -1})).norm() < 1e-12);
  CHECK(support(ConvexBody::l2(2, 2.0), vec({3, 4})).value == doctest::Approx(10.0));
  CHECK(support(ConvexBody::linf(3), vec({1, -2, 0.5})).value == doctest::Approx(3.5));

  // Identity on 2x2: the best sign pair gives u^T I v = 2.
  const ConvexBody mx = ConvexBody::maxnorm(2, 2);
  AtomOracle atoms{2, 2};
  const auto sm = support(mx, vec({1, 0, 0, 1}), &atoms);
  CHECK(sm.value == doctest::Approx(atoms.grothendieck * 2.0));

  Rng rng(3);
  for (auto body : {ConvexBody::l1(6), ConvexBody::l2(6, 2.0), ConvexBody::linf(6, 0.5)}) {
    for (int i = 0; i < 20; ++i) {
      const Vector g = rng.gaussian_vector(6);
      const auto s = support(body, g);
      CHECK(s.value == doctest::Approx(oracle::support(body, g)).epsilon(1e-12));
      CHECK(g.dot(s.argmax) == doctest::Approx(s.value).epsilon(1e-9));
      CHECK(membership(body, s.argmax));
    }
  }
}

TEST_CASE("atom oracle matches brute force and flatten is row-major") {
  Rng rng(8);
  AtomOracle atoms{3, 4};
  for (int rep = 0; rep < 10; ++rep) {
    const Vector g = rng.gaussian_vector(12);
    double best = -1e300;
    for (int su = 0; su < 8; ++su) {
      for (int sv = 0; sv < 16; ++sv) {
        double v = 0.0;
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 4; ++j) {
            const double ui = (su >> i & 1) ? -1.0 : 1.0, vj = (sv >> j & 1) ? -1.0 : 1.0;
            v += ui * g[i * 4 + j] * vj;
          }
        }
        best = std::max(best, v);
      }
    }
    const auto a = atoms.maximize(g);
    CHECK(a.exact);
    CHECK(a.value == doctest::Approx(best));
    CHECK(AtomOracle::flatten(a.u, a.v).dot(g) == doctest::Approx(best));
  }
}

TEST_CASE("support on the intersection with a euclidean ball") {
  Rng rng(5);
  const Vector g4 = rng.gaussian_vector(4);
  CHECK(support_intersection(ConvexBody::l1(4), 1.0, g4).value == doctest::Approx(g4.cwiseAbs().maxCoeff()));
  CHECK(support_intersection(ConvexBody::l1(4), 0.5, g4).value == doctest::Approx(0.5 * g4.norm()));
  CHECK(support_intersection(ConvexBody::l2(4, 2.0), 0.5, g4).value == doctest::Approx(0.5 * g4.norm()));

  const Vector g = vec({3, 2, 1});
  const auto s = support_intersection(ConvexBody::l1(3), 0.9, g);
  CHECK(s.value == doctest::Approx(oracle::l1_l2_support_grid(g, 0.9)).epsilon(1e-4));
  CHECK(s.argmax.norm() <= 0.9 + 1e-9);
  CHECK(s.argmax.cwiseAbs().sum() <= 1.0 + 1e-9);

  // Closed form and the Dykstra route agree.
  for (int i = 0; i < 10; ++i) {
    const Vector h = rng.gaussian_vector(8);
    const double r = 0.2 + 0.1 * i;
    const double exact = support_intersection(ConvexBody::l1(8), r, h).value;
    const double iter = support_intersection_iterative(ConvexBody::l1(8), r, h).value;
    CHECK(iter == doctest::Approx(exact).epsilon(1e-5));
  }
  CHECK_THROWS_AS(support_intersection(ConvexBody::l1(3), 0.0, g), ArgumentError);
}

TEST_CASE("linf intersection support against a direct bound") {
  Rng rng(6);
  const ConvexBody body = ConvexBody::linf(5);
  for (int i = 0; i < 10; ++i) {
    const Vector g = rng.gaussian_vector(5);
    const double r = 0.5 + 0.3 * i;
    const auto s = support_intersection(body, r, g);
    CHECK(s.value <= std::min(r * g.norm(), g.cwiseAbs().sum()) + 1e-6);
    CHECK(s.argmax.cwiseAbs().maxCoeff() <= 1.0 + 1e-6);
    CHECK(s.argmax.norm() <= r + 1e-6);
    CHECK(g.dot(s.argmax) == doctest::Approx(s.value).epsilon(1e-6));
    CHECK(support_intersection_iterative(body, r, g).value == doctest::Approx(s.value).epsilon(1e-5));
  }
  // For r >= sqrt(d) the ball constraint is inactive.
  const Vector g = rng.gaussian_vector(5);
  CHECK(support_intersection(body, 3.0, g).value == doctest::Approx(g.cwiseAbs().sum()).epsilon(1e-6));
}

TEST_CASE("membership and gauge") {
  const ConvexBody b = ConvexBody::l1(2);
  CHECK(membership(b, Vector::Zero(2)));
  CHECK(membership(b, vec({0.5, 0.5})));
  CHECK_FALSE(membership(b, vec({0.8, 0.8})));
  CHECK(gauge(b, vec({0.8, 0.8})) == doctest::Approx(1.6));
  CHECK(gauge(ConvexBody::linf(2, 2.0), vec({1, -3})) == doctest::Approx(1.5));

  Matrix u(2, 1), v(2, 1);
  u << 1, -1;
  v << 1, 1;
  CHECK(factorization_maxnorm_bound(u, v) == doctest::Approx(1.0));
  // A rank-one sign matrix has max-norm 1.
  const Vector a = AtomOracle::flatten(u.col(0), v.col(0));
  CHECK(gauge(ConvexBody::maxnorm(2, 2), a) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("diameters") {
  CHECK(ConvexBody::l1(5, 2.0).diameter() == doctest::Approx(4.0));
  CHECK(ConvexBody::l2(5, 2.0).diameter() == doctest::Approx(4.0));
  CHECK(ConvexBody::linf(4, 1.0).diameter() == doctest::Approx(4.0));
  CHECK(ConvexBody::maxnorm(3, 4, 0.5).diameter() == doctest::Approx(2.0 * 0.5 * std::sqrt(12.0)));
  CHECK(ConvexBody::l1(3).scaled(2.0).radius == doctest::Approx(2.0));
}
