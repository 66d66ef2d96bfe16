#include "ermlab/erm.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "ermlab/parallel.hpp"
#include "ermlab/rng.hpp"

namespace ermlab {

namespace {

// R_N(t) = t^T S t - 2 c^T t + y2 with S = X^T X / N, c = X^T Y / N, y2 = |Y|^2 / N.
struct Quadratic {
  Matrix S;
  Vector c;
  double y2 = 0.0;

  explicit Quadratic(const Dataset& data) {
    data.validate();
    if (data.N() < 1) throw ArgumentError("ERM needs at least one sample");
    const double n = data.N();
    S = data.X.transpose() * data.X / n;
    c = data.X.transpose() * data.Y / n;
    y2 = data.Y.squaredNorm() / n;
  }

  double value(const Vector& t) const { return t.dot(S * t) - 2.0 * c.dot(t) + y2; }
  Vector gradient(const Vector& t) const { return 2.0 * (S * t - c); }
  // R(a) - R(b) without forming either value.
  double difference(const Vector& a, const Vector& b) const {
    return (a - b).dot(S * (a + b) - 2.0 * c);
  }

  // Largest eigenvalue of 2S by power iteration from a fixed start.
  double lipschitz(int iters) const {
    Vector v = Vector::Ones(S.rows()).normalized();
    double lambda = 0.0;
    for (int i = 0; i < iters; ++i) {
      Vector w = S * v;
      const double nw = w.norm();
      if (nw == 0.0) return 0.0;
      lambda = v.dot(w);
      v = w / nw;
    }
    return 2.0 * std::max(lambda, (S * v).norm());
  }
};

Vector flatten_rowmajor(const Matrix& a) {
  Vector out(a.size());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out[i * a.cols() + j] = a(i, j);
  }
  return out;
}

Matrix unflatten_rowmajor(const Vector& v, int p, int q) {
  Matrix a(p, q);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < q; ++j) a(i, j) = v[static_cast<Eigen::Index>(i) * q + j];
  }
  return a;
}

void project_rows(Matrix& m, double bound) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > bound) m.row(i) *= bound / n;
  }
}

// Exact minimizer of the quadratic on the face of the body that x lies on
// (l1: fixed support and signs on the sphere |t|_1 = R; linf: coordinates at
// +-R frozen). Returns false when the face system is singular or the solution
// leaves the face.
bool polish_on_face(const ConvexBody& body, const Quadratic& f, const Vector& x, Vector& out) {
  const double R = body.radius;
  const Eigen::Index d = x.size();
  const double tiny = 1e-12 * R;
  std::vector<Eigen::Index> free_idx;
  if (body.kind == BodyKind::l1_ball) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (std::abs(x[i]) > tiny) free_idx.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(free_idx.size());
    if (k == 0) return false;
    const bool on_sphere = x.lpNorm<1>() >= R * (1.0 - 1e-9);
    const Eigen::Index m = on_sphere ? k + 1 : k;
    Matrix A = Matrix::Zero(m, m);
    Vector b = Vector::Zero(m);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index c = 0; c < k; ++c) A(a, c) = 2.0 * f.S(free_idx[a], free_idx[c]);
      b[a] = 2.0 * f.c[free_idx[a]];
      if (on_sphere) {
        const double sg = x[free_idx[a]] > 0.0 ? 1.0 : -1.0;
        A(a, k) = sg;
        A(k, a) = sg;
      }
    }
    if (on_sphere) b[k] = R;
    // The face system is singular when the support outgrows the sample; any
    // consistent solution is a minimizer on the face.
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
    const Vector sol = cod.solve(b);
    if ((A * sol - b).norm() > 1e-10 * std::max(1.0, b.norm())) return false;
    out = Vector::Zero(d);
    for (Eigen::Index a = 0; a < k; ++a) {
      if (sol[a] * x[free_idx[a]] <= 0.0) return false;  // sign flip leaves the face
      out[free_idx[a]] = sol[a];
    }
    return out.lpNorm<1>() <= R * (1.0 + 1e-12);
  }
  if (body.kind == BodyKind::linf_ball) {
    std::vector<Eigen::Index> fixed;
    for (Eigen::Index i = 0; i < d; ++i) {
      (std::abs(x[i]) >= R * (1.0 - 1e-12) ? fixed : free_idx).push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(free_idx.size());
    out = x;
    if (k == 0) return true;
    Matrix A(k, k);
    Vector b(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index c = 0; c < k; ++c) A(a, c) = f.S(free_idx[a], free_idx[c]);
      double rhs = f.c[free_idx[a]];
      for (Eigen::Index j : fixed) rhs -= f.S(free_idx[a], j) * x[j];
      b[a] = rhs;
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
    const Vector sol = cod.solve(b);
    if ((A * sol - b).norm() > 1e-10 * std::max(1.0, b.norm())) return false;
    for (Eigen::Index a = 0; a < k; ++a) {
      if (std::abs(sol[a]) > R) return false;
      out[free_idx[a]] = sol[a];
    }
    return true;
  }
  return false;
}

}  // namespace

double empirical_risk(const Dataset& data, const Vector& t) {
  if (t.size() != data.dim()) throw DimensionError("empirical_risk: parameter dimension mismatch");
  if (data.N() == 0) return 0.0;
  return (data.Y - data.X * t).squaredNorm() / data.N();
}

ErmSolution erm_linear(const ConvexBody& body, const Dataset& data, const ErmConfig& cfg) {
  if (body.kind == BodyKind::maxnorm_ball) {
    throw UnsupportedError("erm_linear: maxnorm body needs the factorized or Frank-Wolfe solver");
  }
  if (body.dim != data.dim()) {
    throw DimensionError("erm_linear: body dim " + std::to_string(body.dim) + ", data dim " +
                         std::to_string(data.dim()));
  }
  const Quadratic f(data);
  double L = std::max(f.lipschitz(cfg.power_iters), 1e-12);
  const double L_cert = L;

  Vector x = project(body, Vector::Zero(body.dim));
  Vector y = x;
  double tk = 1.0;

  auto stationarity = [&](const Vector& t) {
    return L_cert * (t - project(body, t - f.gradient(t) / L_cert)).norm();
  };

  ErmSolution sol;
  sol.solver = "apg_" + to_string(body.kind);
  double residual = stationarity(x);
  int it = 0;
  while (residual > cfg.tol && it < cfg.max_iter) {
    ++it;
    const Vector g = f.gradient(y);
    Vector z;
    for (int bt = 0; bt < 60; ++bt) {
      z = project(body, y - g / L);
      // R(z) - R(y) - <g, z - y> = (z - y)^T S (z - y), free of cancellation.
      const Vector step = z - y;
      if (step.dot(f.S * step) <= 0.5 * L * step.squaredNorm() * (1.0 + 1e-12)) break;
      L *= 2.0;
    }
    const double tk1 = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    if (f.difference(z, x) <= 0.0) {
      y = z + ((tk - 1.0) / tk1) * (z - x);
      x = std::move(z);
      tk = tk1;
    } else {
      // Objective went up: keep x and restart the momentum.
      y = x;
      tk = 1.0;
    }
    residual = stationarity(x);
    if (residual > cfg.tol && (it % 50 == 0 || it == cfg.max_iter)) {
      Vector cand;
      if (polish_on_face(body, f, x, cand) && f.difference(cand, x) <= 1e-13 * std::max(1.0, f.y2)) {
        const double r = stationarity(cand);
        if (r < residual) {
          x = cand;
          y = x;
          tk = 1.0;
          residual = r;
        }
      }
    }
  }

  sol.t_hat = x;
  sol.iterations = it;
  sol.certificate = residual;
  sol.converged = residual <= cfg.tol;
  sol.empirical_risk = empirical_risk(data, x);
  sol.gauge = gauge(body, x);
  if (!sol.converged) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "erm_linear: stationarity residual %.3e after %d iterations", residual, it);
    throw ConvergenceError(msg, residual);
  }
  return sol;
}

ErmSolution erm_frank_wolfe_atoms(const AtomOracle& oracle, const Dataset& data,
                                  const ErmConfig& cfg) {
  const int dim = oracle.rows * oracle.cols;
  if (dim != data.dim()) throw DimensionError("erm_frank_wolfe_atoms: atom and data dims differ");
  if (!(cfg.fw_scale > 0.0)) throw ArgumentError("erm_frank_wolfe_atoms: fw_scale must be positive");
  const Quadratic f(data);

  struct Active {
    Vector atom;
    double weight;
  };
  auto lmo = [&](const Vector& grad) {
    const auto atom = oracle.maximize(-grad);
    return Vector(cfg.fw_scale * AtomOracle::flatten(atom.u, atom.v));
  };
  auto find = [](std::vector<Active>& set, const Vector& atom) -> Active* {
    for (auto& a : set) {
      if ((a.atom - atom).lpNorm<Eigen::Infinity>() == 0.0) return &a;
    }
    return nullptr;
  };

  // Start at 0 = (s + (-s)) / 2.
  Vector x = Vector::Zero(dim);
  std::vector<Active> active;
  {
    const Vector s = lmo(f.gradient(x));
    active.push_back({s, 0.5});
    active.push_back({-s, 0.5});
  }

  ErmSolution sol;
  sol.solver = "frank_wolfe_atoms";
  double gap = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < cfg.fw_iters; ++it) {
    const Vector grad = f.gradient(x);
    const Vector s = lmo(grad);
    gap = grad.dot(x - s);
    if (gap <= cfg.gap_tol) break;

    std::size_t away = 0;
    double away_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
      const double v = grad.dot(active[i].atom);
      if (v > away_val) {
        away_val = v;
        away = i;
      }
    }
    const double away_gap = away_val - grad.dot(x);

    Vector dir;
    double gamma_max;
    bool fw_step = gap >= away_gap || active.size() == 1;
    if (fw_step) {
      dir = s - x;
      gamma_max = 1.0;
    } else {
      const double w = active[away].weight;
      dir = x - active[away].atom;
      gamma_max = w / (1.0 - w);
    }
    const double curvature = dir.dot(f.S * dir);
    double gamma = curvature > 0.0 ? -grad.dot(dir) / (2.0 * curvature) : gamma_max;
    gamma = std::clamp(gamma, 0.0, gamma_max);

    if (fw_step) {
      for (auto& a : active) a.weight *= 1.0 - gamma;
      if (Active* hit = find(active, s)) {
        hit->weight += gamma;
      } else {
        active.push_back({s, gamma});
      }
      if (gamma >= 1.0) {
        active.assign(1, Active{s, 1.0});
      }
    } else {
      for (auto& a : active) a.weight *= 1.0 + gamma;
      active[away].weight -= gamma;
    }
    std::erase_if(active, [](const Active& a) { return a.weight <= 1e-15; });
    x += gamma * dir;
  }

  sol.t_hat = x;
  sol.iterations = it;
  sol.certificate = std::max(gap, 0.0);
  sol.converged = gap <= cfg.gap_tol;
  sol.empirical_risk = empirical_risk(data, x);
  double total = 0.0;
  for (const auto& a : active) total += a.weight;
  sol.gauge = total * cfg.fw_scale;  // every sign atom has max-norm 1
  if (!sol.converged) {
    throw ConvergenceError("erm_frank_wolfe_atoms: duality gap " + std::to_string(gap) + " after " +
                               std::to_string(it) + " iterations",
                           gap);
  }
  return sol;
}

ErmSolution erm_maxnorm_factorized(int p, int q, const Dataset& data, int rank_k,
                                   const ErmConfig& cfg) {
  if (p < 1 || q < 1) throw ArgumentError("erm_maxnorm_factorized: p, q must be >= 1");
  if (rank_k == 0) rank_k = std::min(p, q);
  if (rank_k < 1) throw ArgumentError("erm_maxnorm_factorized: rank_k must be >= 1");
  if (cfg.restarts < 1) throw ArgumentError("erm_maxnorm_factorized: restarts must be >= 1");
  if (!(cfg.maxnorm_radius > 0.0)) throw ArgumentError("erm_maxnorm_factorized: radius must be positive");
  if (p * q != data.dim()) throw DimensionError("erm_maxnorm_factorized: p * q != data dim");
  const Quadratic f(data);
  const double lip = std::max(f.lipschitz(cfg.power_iters), 1e-12);
  const double row_bound = std::sqrt(cfg.maxnorm_radius);

  struct Run {
    Matrix U, V;
    double initial = 0.0;
    double value = 0.0;
    int iterations = 0;
  };
  std::vector<Run> runs(static_cast<std::size_t>(cfg.restarts));

  // Restart 0 starts from the balanced top-k SVD of the min-norm least-squares fit.
  Matrix spectral_u, spectral_v;
  {
    const Vector ls = data.X.completeOrthogonalDecomposition().solve(data.Y);
    const Matrix b = unflatten_rowmajor(ls, p, q);
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector root = svd.singularValues().head(rank_k).cwiseSqrt();
    spectral_u = svd.matrixU().leftCols(rank_k) * root.asDiagonal();
    spectral_v = svd.matrixV().leftCols(rank_k) * root.asDiagonal();
  }

  parallel_for(runs.size(), [&](std::size_t r) {
    Rng rng(cfg.seed, "factorized_restart", r);
    Run& run = runs[r];
    run.U.resize(p, rank_k);
    run.V.resize(q, rank_k);
    if (r == 0) {
      run.U = spectral_u;
      run.V = spectral_v;
    } else {
      for (Eigen::Index i = 0; i < run.U.size(); ++i) run.U.data()[i] = rng.gaussian() / std::sqrt(rank_k);
      for (Eigen::Index i = 0; i < run.V.size(); ++i) run.V.data()[i] = rng.gaussian() / std::sqrt(rank_k);
    }
    project_rows(run.U, row_bound);
    project_rows(run.V, row_bound);

    auto objective = [&](const Matrix& U, const Matrix& V) {
      return f.value(flatten_rowmajor(U * V.transpose()));
    };
    auto grad_a = [&](const Matrix& U, const Matrix& V) {
      return unflatten_rowmajor(f.gradient(flatten_rowmajor(U * V.transpose())), p, q);
    };
    // One projected gradient step on `block` with the other factor fixed.
    auto block_step = [&](Matrix& block, const Matrix& other, bool left, double current) {
      const Matrix G = left ? grad_a(block, other) : Matrix(grad_a(other, block).transpose());
      const Matrix grad = G * other;
      double L = lip * std::max(other.squaredNorm(), 1e-12);
      for (int bt = 0; bt < 60; ++bt) {
        Matrix cand = block - grad / L;
        project_rows(cand, row_bound);
        const Matrix step = cand - block;
        const double val = left ? objective(cand, other) : objective(other, cand);
        if (val <= current + (grad.array() * step.array()).sum() + 0.5 * L * step.squaredNorm() + 1e-15) {
          if (val <= current) {
            block = std::move(cand);
            return val;
          }
          return current;
        }
        L *= 2.0;
      }
      return current;
    };

    run.initial = objective(run.U, run.V);
    double value = run.initial;
    int it = 0;
    for (; it < cfg.factor_iters; ++it) {
      const double before = value;
      value = block_step(run.U, run.V, true, value);
      value = block_step(run.V, run.U, false, value);
      if (before - value <= cfg.factor_tol * before + 1e-15 * f.y2) break;
    }
    run.value = value;
    run.iterations = it;
  });

  std::size_t best = runs.size();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].value > runs[r].initial + 1e-12) continue;  // failed descent test
    if (best == runs.size() || runs[r].value < runs[best].value) best = r;
  }
  if (best == runs.size()) throw NumericalError("erm_maxnorm_factorized: every restart failed to descend");

  const Run& run = runs[best];
  ErmSolution sol;
  sol.solver = "maxnorm_factorized";
  sol.t_hat = flatten_rowmajor(run.U * run.V.transpose());
  sol.iterations = run.iterations;
  sol.empirical_risk = empirical_risk(data, sol.t_hat);
  sol.gauge = factorization_maxnorm_bound(run.U, run.V) / cfg.maxnorm_radius;
  {
    // Stationarity of the factored problem: projected-gradient mapping norm at lip scale.
    const Matrix G = unflatten_rowmajor(f.gradient(sol.t_hat), p, q);
    Matrix U1 = run.U - G * run.V / lip;
    Matrix V1 = run.V - G.transpose() * run.U / lip;
    project_rows(U1, row_bound);
    project_rows(V1, row_bound);
    sol.certificate = lip * std::sqrt((U1 - run.U).squaredNorm() + (V1 - run.V).squaredNorm());
  }
  sol.converged = true;
  return sol;
}

ExcessRisk excess_risk(const Vector& t_hat, const Model& model) {
  model.validate();
  if (t_hat.size() != model.design.d) throw DimensionError("excess_risk: dimension mismatch");
  ExcessRisk out;
  switch (model.noise.kind) {
    case NoiseKind::gaussian_noise: out.value = (t_hat - *model.t_star).squaredNorm(); break;
    case NoiseKind::orthogonal_target: out.value = t_hat.squaredNorm(); break;
  }
  return out;
}

ExcessRisk excess_risk(const ErmSolution& solution, const Model& model) {
  return excess_risk(solution.t_hat, model);
}

ExcessRisk excess_risk_holdout(const Vector& t_hat, const Vector& f_ref, const Model& model,
                               int holdout, std::uint64_t seed) {
  if (holdout < 2) throw ArgumentError("excess_risk_holdout: holdout must be >= 2");
  if (t_hat.size() != model.design.d || f_ref.size() != model.design.d) {
    throw DimensionError("excess_risk_holdout: dimension mismatch");
  }
  const Dataset data = sample_dataset(model, holdout, derive_seed(seed, "holdout"));
  const Vector a = data.X * t_hat - data.Y;
  const Vector b = data.X * f_ref - data.Y;
  const Vector loss = a.array().square() - b.array().square();
  const double mean = loss.mean();
  const double var = (loss.array() - mean).square().sum() / (holdout - 1);
  ExcessRisk out;
  out.value = mean;
  out.std_error = std::sqrt(var / holdout);
  out.closed_form = false;
  return out;
}

}  // namespace ermlab
