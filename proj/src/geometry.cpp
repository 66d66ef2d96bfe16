#include "ermlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ermlab/rng.hpp"

namespace ermlab {
namespace {

void check_dim(const ConvexBody& body, const Vector& x, const char* op) {
  if (x.size() != body.dim) {
    throw DimensionError(std::string(op) + ": expected length " + std::to_string(body.dim) +
                         ", got " + std::to_string(x.size()));
  }
}

double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }

Vector project_l1(const Vector& x, double radius) {
  if (x.lpNorm<1>() <= radius) return x;
  std::vector<double> u(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) u[i] = std::abs(x[i]);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - radius) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y[i] = sgn(x[i]) * std::max(std::abs(x[i]) - theta, 0.0);
  }
  return y;
}

Vector project_l2(const Vector& x, double radius) {
  const double n = x.norm();
  return n <= radius ? x : Vector(x * (radius / n));
}

Vector project_linf(const Vector& x, double radius) {
  return x.cwiseMax(-radius).cwiseMin(radius);
}

// Scales `a` so that it satisfies both |a|_1 <= l1_radius and |a|_2 <= r with
// one of them tight.
Vector scale_into(const Vector& a, double l1_radius, double r) {
  const double n1 = a.lpNorm<1>();
  const double n2 = a.norm();
  if (n2 == 0.0) return a;
  return a * std::min(r / n2, l1_radius / n1);
}

// Exact sup of <g, t> over R B_1 ∩ r B_2 through the dual
//   min_{lambda >= 0} lambda R + r |soft(g, lambda)|_2,
// which is convex and C^1 on (0, max|g|). All breakpoints and the stationary
// point of every segment are evaluated.
SupportResult support_l1_ball_intersection(const Vector& g, double radius, double r) {
  const Eigen::Index d = g.size();
  SupportResult out;
  out.argmax = Vector::Zero(d);
  std::vector<double> a(d);
  for (Eigen::Index i = 0; i < d; ++i) a[i] = std::abs(g[i]);
  std::sort(a.begin(), a.end(), std::greater<>());
  if (d == 0 || a[0] == 0.0 || r <= 0.0) return out;

  const double rho = radius / r;
  auto objective = [&](double lambda, double s1, double s2, double k) {
    const double q = std::max(0.0, s2 - 2.0 * lambda * s1 + k * lambda * lambda);
    return lambda * radius + r * std::sqrt(q);
  };

  double best_lambda = a[0];
  double best = radius * a[0];
  double s1 = 0.0;
  double s2 = 0.0;
  for (Eigen::Index k = 1; k <= d; ++k) {
    s1 += a[k - 1];
    s2 += a[k - 1] * a[k - 1];
    const double hi = a[k - 1];
    const double lo = k < d ? a[k] : 0.0;
    const double kk = static_cast<double>(k);
    for (double lambda : {hi, lo}) {
      const double v = objective(lambda, s1, s2, kk);
      if (v < best) {
        best = v;
        best_lambda = lambda;
      }
    }
    if (rho * rho < kk) {
      const double spread = std::max(0.0, s2 - s1 * s1 / kk);
      const double u = rho * std::sqrt(spread / (1.0 - rho * rho / kk));
      const double lambda = (s1 - u) / kk;
      if (u > 0.0 && lambda >= lo && lambda <= hi) {
        const double v = objective(lambda, s1, s2, kk);
        if (v < best) {
          best = v;
          best_lambda = lambda;
        }
      }
    }
  }
  out.value = best;

  Vector dir(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    dir[i] = sgn(g[i]) * std::max(std::abs(g[i]) - best_lambda, 0.0);
  }
  if (dir.lpNorm<Eigen::Infinity>() <= 1e-14 * a[0]) {
    // Optimum at lambda = max|g|: spread mass over the tied top coordinates.
    for (Eigen::Index i = 0; i < d; ++i) {
      dir[i] = std::abs(g[i]) >= a[0] * (1.0 - 1e-12) ? sgn(g[i]) : 0.0;
    }
  }
  out.argmax = scale_into(dir, radius, r);
  return out;
}

// Exact sup of <g, t> over R B_inf ∩ r B_2: t_i = sign(g_i) min(R, |g_i| / mu),
// with the m largest coordinates capped and mu fixed by |t|_2 = r.
SupportResult support_linf_ball_intersection(const Vector& g, double radius, double r) {
  const Eigen::Index d = g.size();
  SupportResult out;
  out.argmax = Vector::Zero(d);
  if (radius * radius * static_cast<double>(d) <= r * r) {
    for (Eigen::Index i = 0; i < d; ++i) out.argmax[i] = radius * sgn(g[i]);
    out.value = g.dot(out.argmax);
    return out;
  }
  std::vector<double> a(d);
  for (Eigen::Index i = 0; i < d; ++i) a[i] = std::abs(g[i]);
  std::sort(a.begin(), a.end(), std::greater<>());
  double tail = 0.0;
  for (double v : a) tail += v * v;
  double mu = 0.0;
  for (Eigen::Index m = 0; m < d; ++m) {
    const double room = r * r - static_cast<double>(m) * radius * radius;
    if (room <= 0.0) break;
    if (tail <= 0.0) break;
    const double cand = std::sqrt(tail / room);
    if (a[m] / cand <= radius) {
      mu = cand;
      break;
    }
    tail -= a[m] * a[m];
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    const double mag = mu > 0.0 ? std::min(radius, std::abs(g[i]) / mu) : (g[i] != 0.0 ? radius : 0.0);
    out.argmax[i] = sgn(g[i]) * mag;
  }
  const double n = out.argmax.norm();
  if (n > r) out.argmax *= r / n;
  out.value = g.dot(out.argmax);
  return out;
}

}  // namespace

std::string to_string(BodyKind kind) {
  switch (kind) {
    case BodyKind::l1_ball: return "l1_ball";
    case BodyKind::l2_ball: return "l2_ball";
    case BodyKind::linf_ball: return "linf_ball";
    case BodyKind::maxnorm_ball: return "maxnorm_ball";
  }
  return "unknown";
}

BodyKind body_kind_from_string(std::string_view name) {
  if (name == "l1_ball" || name == "l1") return BodyKind::l1_ball;
  if (name == "l2_ball" || name == "l2") return BodyKind::l2_ball;
  if (name == "linf_ball" || name == "linf") return BodyKind::linf_ball;
  if (name == "maxnorm_ball" || name == "maxnorm") return BodyKind::maxnorm_ball;
  throw UnsupportedError("unknown body kind '" + std::string(name) + "'");
}

ConvexBody ConvexBody::l1(int d, double radius) { return {BodyKind::l1_ball, d, 0, 0, radius}; }
ConvexBody ConvexBody::l2(int d, double radius) { return {BodyKind::l2_ball, d, 0, 0, radius}; }
ConvexBody ConvexBody::linf(int d, double radius) {
  return {BodyKind::linf_ball, d, 0, 0, radius};
}
ConvexBody ConvexBody::maxnorm(int p, int q, double radius) {
  return {BodyKind::maxnorm_ball, p * q, p, q, radius};
}

ConvexBody ConvexBody::scaled(double factor) const {
  ConvexBody b = *this;
  b.radius *= factor;
  return b;
}

double ConvexBody::diameter() const {
  switch (kind) {
    case BodyKind::l1_ball:
    case BodyKind::l2_ball: return 2.0 * radius;
    case BodyKind::linf_ball: return 2.0 * radius * std::sqrt(static_cast<double>(dim));
    case BodyKind::maxnorm_ball: return 2.0 * radius * std::sqrt(static_cast<double>(dim));
  }
  return 0.0;
}

Vector AtomOracle::flatten(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  Vector out(u.size() * v.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    for (Eigen::Index j = 0; j < v.size(); ++j) out[i * v.size() + j] = u[i] * v[j];
  }
  return out;
}

AtomOracle::Atom AtomOracle::maximize(const Vector& g) const {
  if (g.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw DimensionError("AtomOracle::maximize: expected " + std::to_string(rows * cols) +
                         " entries, got " + std::to_string(g.size()));
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> gm(g.data(), rows, cols);

  auto signs = [](const Eigen::VectorXd& w) {
    Eigen::VectorXd s(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) s[i] = sgn(w[i]);
    return s;
  };

  Atom best;
  best.value = -std::numeric_limits<double>::infinity();
  if (rows + cols <= brute_force_cap) {
    // For fixed u the best v is sign(G^T u), so only the shorter side is
    // enumerated; the global sign flip (u, v) -> (-u, -v) is factored out.
    const bool enumerate_rows = rows <= cols;
    const int n = enumerate_rows ? rows : cols;
    const std::uint64_t count = std::uint64_t{1} << (n - 1);
    Eigen::VectorXd s(n);
    for (std::uint64_t mask = 0; mask < count; ++mask) {
      s[0] = 1.0;
      for (int i = 1; i < n; ++i) s[i] = ((mask >> (i - 1)) & 1U) ? -1.0 : 1.0;
      const Eigen::VectorXd w = enumerate_rows ? Eigen::VectorXd(gm.transpose() * s)
                                               : Eigen::VectorXd(gm * s);
      const double value = w.lpNorm<1>();
      if (value > best.value) {
        best.value = value;
        best.u = enumerate_rows ? s : signs(w);
        best.v = enumerate_rows ? signs(w) : s;
      }
    }
    best.exact = true;
    return best;
  }

  Rng rng(seed, "atom_restart");
  for (int restart = 0; restart < restarts; ++restart) {
    Eigen::VectorXd u(rows);
    for (int i = 0; i < rows; ++i) u[i] = rng.rademacher();
    Eigen::VectorXd v = signs(gm.transpose() * u);
    double value = u.dot(gm * v);
    for (int it = 0; it < 1000; ++it) {
      u = signs(gm * v);
      v = signs(gm.transpose() * u);
      const double next = u.dot(gm * v);
      if (next <= value + 1e-14 * std::abs(value)) {
        value = std::max(value, next);
        break;
      }
      value = next;
    }
    if (value > best.value) {
      best.value = value;
      best.u = u;
      best.v = v;
    }
  }
  best.exact = false;
  return best;
}

Vector project(const ConvexBody& body, const Vector& x) {
  check_dim(body, x, "project");
  switch (body.kind) {
    case BodyKind::l1_ball: return project_l1(x, body.radius);
    case BodyKind::l2_ball: return project_l2(x, body.radius);
    case BodyKind::linf_ball: return project_linf(x, body.radius);
    case BodyKind::maxnorm_ball:
      throw UnsupportedError("project: no Euclidean projection onto the max-norm ball");
  }
  throw UnsupportedError("project: unknown body");
}

SupportResult support(const ConvexBody& body, const Vector& g, const AtomOracle* oracle) {
  check_dim(body, g, "support");
  SupportResult out;
  out.argmax = Vector::Zero(body.dim);
  switch (body.kind) {
    case BodyKind::l1_ball: {
      Eigen::Index j = 0;
      const double m = g.cwiseAbs().maxCoeff(&j);
      out.value = body.radius * m;
      out.argmax[j] = body.radius * sgn(g[j]);
      return out;
    }
    case BodyKind::l2_ball: {
      const double n = g.norm();
      out.value = body.radius * n;
      if (n > 0.0) out.argmax = g * (body.radius / n);
      return out;
    }
    case BodyKind::linf_ball: {
      out.value = body.radius * g.lpNorm<1>();
      for (Eigen::Index i = 0; i < g.size(); ++i) out.argmax[i] = body.radius * sgn(g[i]);
      return out;
    }
    case BodyKind::maxnorm_ball: {
      AtomOracle fallback;
      fallback.rows = body.rows;
      fallback.cols = body.cols;
      const AtomOracle& o = oracle ? *oracle : fallback;
      const auto atom = o.maximize(g);
      const double scale = o.grothendieck * body.radius;
      out.value = scale * atom.value;
      out.argmax = scale * AtomOracle::flatten(atom.u, atom.v);
      return out;
    }
  }
  throw UnsupportedError("support: unknown body");
}

Vector project_intersection(const ConvexBody& body, double r, const Vector& x,
                            const DykstraConfig& cfg) {
  check_dim(body, x, "project_intersection");
  Vector cur = x;
  Vector p = Vector::Zero(x.size());
  Vector q = Vector::Zero(x.size());
  double step = std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, x.norm());
  for (int it = 0; it < cfg.max_iter; ++it) {
    const Vector y = project(body, cur + p);
    const Vector p_next = cur + p - y;
    const Vector next = project_l2(y + q, r);
    const Vector q_next = y + q - next;
    // Small iterate steps alone do not certify convergence; the correction
    // terms must settle and both projections must agree.
    step = (next - cur).norm() + (p_next - p).norm() + (q_next - q).norm();
    const double gap = (y - next).norm();
    p = p_next;
    q = q_next;
    cur = next;
    if (step <= cfg.tol * scale && gap <= cfg.tol * scale) return cur;
  }
  throw ConvergenceError("Dykstra projection did not converge within " +
                             std::to_string(cfg.max_iter) + " iterations",
                         step);
}

SupportResult support_intersection_iterative(const ConvexBody& body, double r, const Vector& g,
                                             const DykstraConfig& cfg) {
  check_dim(body, g, "support_intersection");
  if (r <= 0.0) throw ArgumentError("support_intersection: r must be positive");
  SupportResult out;
  out.argmax = Vector::Zero(body.dim);
  const double gn = g.norm();
  if (gn == 0.0) return out;

  // Projected gradient ascent on the linear objective; a long step makes every
  // iterate already close to the maximizing face.
  const double alpha = 10.0 * std::max(r, body.diameter()) / gn;
  Vector t = Vector::Zero(body.dim);
  double step = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 1000; ++it) {
    const Vector next = project_intersection(body, r, t + alpha * g, cfg);
    step = (next - t).norm();
    t = next;
    if (step <= cfg.tol) break;
  }
  if (step > std::sqrt(cfg.tol)) {
    throw ConvergenceError("support_intersection: projected ascent did not settle", step);
  }
  out.value = g.dot(t);
  out.argmax = t;
  return out;
}

SupportResult support_intersection(const ConvexBody& body, double r, const Vector& g,
                                   const DykstraConfig& /*cfg*/, const AtomOracle* oracle) {
  check_dim(body, g, "support_intersection");
  if (r <= 0.0) throw ArgumentError("support_intersection: r must be positive");
  switch (body.kind) {
    case BodyKind::l1_ball: return support_l1_ball_intersection(g, body.radius, r);
    case BodyKind::l2_ball: {
      SupportResult out;
      const double n = g.norm();
      const double rad = std::min(body.radius, r);
      out.value = rad * n;
      out.argmax = n > 0.0 ? Vector(g * (rad / n)) : Vector(Vector::Zero(body.dim));
      return out;
    }
    case BodyKind::linf_ball: return support_linf_ball_intersection(g, body.radius, r);
    case BodyKind::maxnorm_ball: {
      auto out = support(body, g, oracle);
      const double ball = r * g.norm();
      if (ball < out.value) {
        out.value = ball;
        out.argmax = g * (r / g.norm());
      }
      return out;
    }
  }
  throw UnsupportedError("support_intersection: unknown body");
}

double factorization_maxnorm_bound(const Matrix& u, const Matrix& v) {
  return u.rowwise().norm().maxCoeff() * v.rowwise().norm().maxCoeff();
}

double gauge(const ConvexBody& body, const Vector& x) {
  check_dim(body, x, "gauge");
  switch (body.kind) {
    case BodyKind::l1_ball: return x.lpNorm<1>() / body.radius;
    case BodyKind::l2_ball: return x.norm() / body.radius;
    case BodyKind::linf_ball: return x.lpNorm<Eigen::Infinity>() / body.radius;
    case BodyKind::maxnorm_ball: {
      if (x.isZero(0.0)) return 0.0;
      using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      const Matrix a = Eigen::Map<const RowMajor>(x.data(), body.rows, body.cols);
      Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vector root = svd.singularValues().cwiseSqrt();
      const Matrix u = svd.matrixU() * root.asDiagonal();
      const Matrix v = svd.matrixV() * root.asDiagonal();
      return factorization_maxnorm_bound(u, v) / body.radius;
    }
  }
  return std::numeric_limits<double>::infinity();
}

bool membership(const ConvexBody& body, const Vector& x, double tol) {
  return gauge(body, x) <= 1.0 + tol;
}

}  // namespace ermlab
