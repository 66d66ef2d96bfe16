#include <doctest.h>

#include <cmath>
#include <vector>

#include "ermlab/erm.hpp"
#include "ermlab/rng.hpp"

using namespace ermlab;

namespace {

Dataset gaussian_data(int d, int N, const Vector& t, double sigma, std::uint64_t seed) {
  return sample_dataset(DesignSpec::make(DesignKind::gaussian, d), NoiseSpec{NoiseKind::gaussian_noise, sigma}, t, N, seed);
}

Dataset matrix_data(int p, int q, int N, const Vector& t, double sigma, std::uint64_t seed) {
  return sample_dataset(DesignSpec::matrix(p, q), NoiseSpec{NoiseKind::gaussian_noise, sigma}, t, N, seed);
}

// Minimizes the empirical risk over conv(atoms) by projected gradient on the
// simplex weights; returns the risk and the Frank-Wolfe gap of the weights.
std::pair<double, double> simplex_oracle(const std::vector<Vector>& atoms, const Dataset& data) {
  const int m = static_cast<int>(atoms.size());
  Matrix A(data.dim(), m);
  for (int j = 0; j < m; ++j) A.col(j) = atoms[static_cast<std::size_t>(j)];
  const Matrix XA = data.X * A;
  const double n = data.N();
  const Matrix H = 2.0 * XA.transpose() * XA / n;
  const Vector b = 2.0 * XA.transpose() * data.Y / n;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
  const double L = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  auto project_simplex = [](Vector v) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
      cum += u[j];
      const double t = (cum - 1.0) / static_cast<double>(j + 1);
      if (u[j] - t > 0.0) theta = t;
    }
    return Vector((v.array() - theta).max(0.0));
  };
  Vector w = Vector::Constant(m, 1.0 / m), z = w, prev = w;
  double tk = 1.0;
  for (int it = 0; it < 200000; ++it) {
    const Vector grad = H * z - b;
    const Vector next = project_simplex(z - grad / L);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    z = next + ((tk - 1.0) / tn) * (next - prev);
    prev = next;
    tk = tn;
    w = next;
    const Vector g = H * w - b;
    const double gap = g.dot(w) - g.minCoeff();
    if (gap < 1e-10) break;
  }
  const Vector g = H * w - b;
  const Vector t = A * w;
  return {empirical_risk(data, t), g.dot(w) - g.minCoeff()};
}

std::vector<Vector> sign_atoms(int p, int q) {
  std::vector<Vector> out;
  for (int su = 0; su < 1 << p; ++su) {
    for (int sv = 0; sv < 1 << q; ++sv) {
      Vector a(p * q);
      for (int i = 0; i < p; ++i) {
        for (int j = 0; j < q; ++j) a[i * q + j] = ((su >> i & 1) ? -1.0 : 1.0) * ((sv >> j & 1) ? -1.0 : 1.0);
      }
      out.push_back(a);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("empirical risk") {
  Dataset data;
  data.X = Matrix::Identity(2, 2);
  data.Y = Vector::Ones(2);
  CHECK(empirical_risk(data, Vector::Zero(2)) == doctest::Approx(1.0));
  CHECK(empirical_risk(data, Vector::Ones(2)) == doctest::Approx(0.0));
}

TEST_CASE("interior optimum is the least-squares solution") {
  Vector t = Vector::Zero(5);
  t[0] = 0.1;
  t[3] = -0.15;
  const auto data = gaussian_data(5, 400, t, 0.05, 1);
  const Vector ols = data.X.colPivHouseholderQr().solve(data.Y);
  REQUIRE(ols.cwiseAbs().sum() < 1.0);
  const auto sol = erm_linear(ConvexBody::l1(5), data);
  CHECK(sol.converged);
  CHECK(sol.certificate <= 1e-8);
  CHECK((sol.t_hat - ols).norm() <= 1e-6);
}

TEST_CASE("one-dimensional clipping") {
  for (double slope : {2.0, -3.0, 0.4}) {
    Dataset data;
    data.X = Matrix(3, 1);
    data.X << 1.0, 2.0, -1.0;
    data.Y = slope * data.X.col(0);
    const auto sol = erm_linear(ConvexBody::l2(1), data);
    CHECK(sol.t_hat[0] == doctest::Approx(std::clamp(slope, -1.0, 1.0)).epsilon(1e-9));
  }
}

TEST_CASE("l1 erm in two dimensions matches a grid search") {
  Vector t(2);
  t << 0.9, 0.6;
  const auto data = gaussian_data(2, 30, t, 0.5, 4);
  const auto sol = erm_linear(ConvexBody::l1(2), data);
  const Matrix S = data.X.transpose() * data.X / data.N();
  const Vector c = data.X.transpose() * data.Y / data.N();
  const double y2 = data.Y.squaredNorm() / data.N();
  double best = INFINITY;
  const double h = 1e-3;
  for (int i = -1000; i <= 1000; ++i) {
    const double a = i * h;
    const int jmax = 1000 - std::abs(i);
    for (int j = -jmax; j <= jmax; ++j) {
      Vector v(2);
      v << a, j * h;
      best = std::min(best, v.dot(S * v) - 2.0 * c.dot(v) + y2);
    }
  }
  CHECK(sol.empirical_risk <= best + 1e-6);
  CHECK(std::abs(sol.empirical_risk - best) <= 1e-3);
  CHECK(sol.t_hat.cwiseAbs().sum() <= 1.0 + 1e-9);
}

TEST_CASE("erm on linf and l2 bodies is feasible and stationary") {
  Rng rng(2);
  const Vector t = 2.0 * rng.gaussian_vector(12);
  const auto data = gaussian_data(12, 40, t, 1.0, 5);
  for (auto body : {ConvexBody::linf(12, 0.3), ConvexBody::l2(12, 1.5), ConvexBody::l1(12, 2.0)}) {
    const auto sol = erm_linear(body, data);
    CHECK(sol.converged);
    CHECK(gauge(body, sol.t_hat) <= 1.0 + 1e-9);
    // Any feasible perturbation does not lower the risk.
    for (int k = 0; k < 50; ++k) {
      const Vector cand = project(body, sol.t_hat + 0.05 * rng.gaussian_vector(12));
      CHECK(empirical_risk(data, cand) >= sol.empirical_risk - 1e-9);
    }
  }
  CHECK_THROWS_AS(erm_linear(ConvexBody::maxnorm(3, 4), gaussian_data(12, 10, t, 1.0, 1)), UnsupportedError);
}

TEST_CASE("frank-wolfe over sign atoms") {
  AtomOracle oracle{3, 3};
  Dataset zero = matrix_data(3, 3, 30, Vector::Zero(9), 0.0, 3);
  const auto z = erm_frank_wolfe_atoms(oracle, zero);
  CHECK(z.t_hat.norm() <= 1e-12);
  CHECK(z.certificate <= 1e-12);

  // Sampling oracle over the convex hull of all 64 sign atoms.
  const auto atoms = sign_atoms(3, 3);
  REQUIRE(atoms.size() == 64);
  Rng rng(9);
  for (int rep = 0; rep < 3; ++rep) {
    const Vector t = 1.5 * rng.gaussian_vector(9);
    const auto data = matrix_data(3, 3, 25, t, 0.5, 100 + rep);
    const auto fw = erm_frank_wolfe_atoms(oracle, data);
    const auto [risk, gap] = simplex_oracle(atoms, data);
    CHECK(gap <= 1e-6);
    CHECK(std::abs(fw.empirical_risk - risk) <= 1e-4);
    CHECK(fw.gauge <= 1.0 + 1e-9);
  }

  // Realizable rank-one sign target.
  Eigen::VectorXd u(3), v(3);
  u << 1, -1, 1;
  v << -1, 1, 1;
  const Vector a = AtomOracle::flatten(u, v);
  const auto data = matrix_data(3, 3, 40, a, 0.0, 8);
  const auto fw = erm_frank_wolfe_atoms(oracle, data);
  CHECK(fw.empirical_risk <= 1e-6);
}

TEST_CASE("factorized max-norm solver") {
  Eigen::VectorXd u(4), v(4);
  u << 1, 1, -1, 1;
  v << 1, -1, -1, 1;
  const Vector a = AtomOracle::flatten(u, v);
  const auto data = matrix_data(4, 4, 60, a, 0.0, 2);
  ErmConfig cfg;
  const auto sol = erm_maxnorm_factorized(4, 4, data, 0, cfg);
  CHECK(sol.empirical_risk <= 1e-6);
  CHECK(sol.gauge <= 1.0 + 1e-9);

  Rng rng(31);
  AtomOracle oracle{4, 4};
  for (int rep = 0; rep < 4; ++rep) {
    const Vector t = rng.gaussian_vector(16);
    const auto noisy = matrix_data(4, 4, 30, t, 1.0, 50 + rep);
    const auto fw = erm_frank_wolfe_atoms(oracle, noisy);
    const auto full = erm_maxnorm_factorized(4, 4, noisy, 0, cfg);
    const auto one = erm_maxnorm_factorized(4, 4, noisy, 1, cfg);
    CHECK(full.empirical_risk <= fw.empirical_risk + 1e-3);
    CHECK(full.empirical_risk <= one.empirical_risk + 1e-9);
  }
}

TEST_CASE("excess risk") {
  Vector t = Vector::Zero(4);
  t[1] = 0.3;
  const Model model{DesignSpec::make(DesignKind::gaussian, 4), NoiseSpec{NoiseKind::gaussian_noise, 1.0}, t};
  CHECK(excess_risk(t, model).value == 0.0);
  Vector shifted = t;
  shifted[0] += 0.7;
  CHECK(excess_risk(shifted, model).value == doctest::Approx(0.49));

  const Model ortho{DesignSpec::make(DesignKind::gaussian, 4), NoiseSpec{NoiseKind::orthogonal_target, 1.0}, std::nullopt};
  CHECK(excess_risk(shifted, ortho).value == doctest::Approx(shifted.squaredNorm()));

  const auto est = excess_risk_holdout(shifted, t, model, 200000, 17);
  CHECK_FALSE(est.closed_form);
  CHECK(std::abs(est.value - 0.49) <= 3.0 * est.std_error);
}
