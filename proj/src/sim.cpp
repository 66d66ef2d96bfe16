#include "ermlab/sim.hpp"

#include <cmath>
#include <limits>

#include "ermlab/parallel.hpp"
#include "ermlab/widths.hpp"

namespace ermlab {

std::string to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::gaussian: return "gaussian";
    case DesignKind::rademacher: return "rademacher";
    case DesignKind::uniform_cube: return "uniform_cube";
    case DesignKind::unconditional_bounded: return "unconditional_bounded";
    case DesignKind::matrix_iid: return "matrix_iid";
  }
  return "unknown";
}

DesignKind design_kind_from_string(std::string_view name) {
  if (name == "gaussian") return DesignKind::gaussian;
  if (name == "rademacher") return DesignKind::rademacher;
  if (name == "uniform_cube") return DesignKind::uniform_cube;
  if (name == "unconditional_bounded") return DesignKind::unconditional_bounded;
  if (name == "matrix_iid") return DesignKind::matrix_iid;
  throw ArgumentError("unknown design kind '" + std::string(name) + "'");
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::gaussian_noise ? "gaussian_noise" : "orthogonal_target";
}

NoiseKind noise_kind_from_string(std::string_view name) {
  if (name == "gaussian_noise" || name == "gaussian") return NoiseKind::gaussian_noise;
  if (name == "orthogonal_target" || name == "orthogonal") return NoiseKind::orthogonal_target;
  throw ArgumentError("unknown noise kind '" + std::string(name) + "'");
}

DesignSpec DesignSpec::make(DesignKind kind, int d) {
  if (kind == DesignKind::matrix_iid) throw ArgumentError("matrix_iid design needs (p, q)");
  DesignSpec s;
  s.kind = kind;
  s.d = d;
  s.validate();
  return s;
}

DesignSpec DesignSpec::matrix(int p, int q) {
  DesignSpec s;
  s.kind = DesignKind::matrix_iid;
  s.p = p;
  s.q = q;
  s.d = p * q;
  s.validate();
  return s;
}

void DesignSpec::validate() const {
  if (d < 1) throw ArgumentError("design: d must be >= 1");
  if (kind == DesignKind::matrix_iid && (p < 1 || q < 1 || p * q != d)) {
    throw ArgumentError("design: matrix_iid needs p, q >= 1 with p * q = d");
  }
}

void DesignSpec::sample_row(Rng& rng, Eigen::Ref<Vector> row) const {
  static const double cube = std::sqrt(3.0);
  static const double unconditional_norm = std::sqrt(7.0 / 3.0);  // sqrt(E(1+u)^2)
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    switch (kind) {
      case DesignKind::gaussian:
      case DesignKind::matrix_iid: row[j] = rng.gaussian(); break;
      case DesignKind::rademacher: row[j] = rng.rademacher(); break;
      case DesignKind::uniform_cube: row[j] = cube * (2.0 * rng.uniform() - 1.0); break;
      case DesignKind::unconditional_bounded: {
        const double eps = rng.rademacher();
        row[j] = eps * (1.0 + rng.uniform()) / unconditional_norm;
        break;
      }
    }
  }
}

void Model::validate() const {
  design.validate();
  if (noise.sigma < 0.0 || !std::isfinite(noise.sigma)) {
    throw ArgumentError("noise: sigma must be finite and nonnegative");
  }
  if (noise.kind == NoiseKind::gaussian_noise) {
    if (!t_star) throw ArgumentError("gaussian_noise model needs t_star");
    if (t_star->size() != design.d) {
      throw DimensionError("t_star has length " + std::to_string(t_star->size()) + ", design d = " +
                           std::to_string(design.d));
    }
  }
}

Vector Model::regression_vector() const {
  if (noise.kind == NoiseKind::orthogonal_target) return Vector::Zero(design.d);
  if (!t_star) throw ArgumentError("gaussian_noise model needs t_star");
  return *t_star;
}

void Dataset::validate() const {
  if (X.rows() != Y.size()) {
    throw DimensionError("dataset: X has " + std::to_string(X.rows()) + " rows but Y has " +
                         std::to_string(Y.size()) + " entries");
  }
  if (!X.allFinite() || !Y.allFinite()) throw ArgumentError("dataset: non-finite entries");
}

Dataset sample_dataset(const DesignSpec& design, const NoiseSpec& noise,
                       const std::optional<Vector>& t_star, int N, std::uint64_t seed) {
  Model model{design, noise, t_star};
  model.validate();
  if (N < 0) throw ArgumentError("sample_dataset: N must be >= 0");
  Dataset data;
  data.X.resize(N, design.d);
  data.Y.resize(N);
  // Row-major scratch so each row is contiguous for its own stream.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(N, design.d);
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
    Rng rng(seed, "row", i);
    auto row = rows.row(static_cast<Eigen::Index>(i));
    Vector x(design.d);
    design.sample_row(rng, x);
    row = x.transpose();
    const double w = rng.gaussian();
    if (noise.kind == NoiseKind::gaussian_noise) {
      data.Y[static_cast<Eigen::Index>(i)] = x.dot(*t_star) + noise.sigma * w;
    } else {
      data.Y[static_cast<Eigen::Index>(i)] = w;
    }
  });
  data.X = rows;
  data.meta.design = design.kind;
  data.meta.noise = noise.kind;
  data.meta.sigma = noise.sigma;
  data.meta.t_star = t_star;
  data.meta.seed = seed;
  return data;
}

Dataset sample_dataset(const Model& model, int N, std::uint64_t seed) {
  return sample_dataset(model.design, model.noise, model.t_star, N, seed);
}

double psi2_estimate(const std::vector<double>& samples, int p_max) {
  if (samples.empty()) throw ArgumentError("psi2_estimate: empty sample");
  if (p_max < 2) throw ArgumentError("psi2_estimate: p_max must be >= 2");
  double best = 0.0;
  for (int p = 2; p <= p_max; ++p) {
    long double acc = 0.0L;
    for (double x : samples) acc += std::pow(static_cast<long double>(std::abs(x)), p);
    const double lp = static_cast<double>(std::pow(acc / samples.size(), 1.0L / p));
    best = std::max(best, lp / std::sqrt(static_cast<double>(p)));
  }
  return best;
}

double psi2_estimate(const Vector& samples, int p_max) {
  return psi2_estimate(std::vector<double>(samples.data(), samples.data() + samples.size()), p_max);
}

double bernstein_ratio(const Vector& t, const Vector& f_star, const Vector& t0) {
  const double dist2 = (t - f_star).squaredNorm();
  const double pl = (t - t0).squaredNorm() - (f_star - t0).squaredNorm();
  if (!(pl > 1e-14)) {
    throw NumericalError("PL_f <= 0 at a class member distinct from f*; f* is mis-specified");
  }
  return dist2 / pl;
}

namespace {

BernsteinEstimate evaluate_members(const std::vector<Vector>& members, const Vector& f_star,
                                   const Model& model, int mc_size, std::uint64_t seed) {
  const Vector t0 = model.regression_vector();
  BernsteinEstimate out;
  out.f_star = f_star;
  out.mc_ratio = std::numeric_limits<double>::quiet_NaN();

  std::vector<const Vector*> active;
  for (const auto& t : members) {
    if (t.size() != f_star.size()) throw DimensionError("bernstein: member dimension mismatch");
    if ((t - f_star).norm() <= 1e-9) continue;
    out.ratio = std::max(out.ratio, bernstein_ratio(t, f_star, t0));
    active.push_back(&t);
  }
  out.evaluated = static_cast<int>(active.size());

  if (mc_size > 0 && !active.empty()) {
    const Dataset data = sample_dataset(model, mc_size, derive_seed(seed, "bernstein_mc"));
    const Vector base = data.X * f_star;
    const Vector resid_star = base - data.Y;
    double mc = 0.0;
    for (const Vector* t : active) {
      const Vector ft = data.X * (*t);
      const double dist2 = (ft - base).squaredNorm() / mc_size;
      const double pl = ((ft - data.Y).squaredNorm() - resid_star.squaredNorm()) / mc_size;
      if (pl > 0.0) mc = std::max(mc, dist2 / pl);
    }
    out.mc_ratio = mc;
  }
  return out;
}

}  // namespace

BernsteinEstimate bernstein_estimate(const ConvexBody& body, const Model& model, int grid_size,
                                     int mc_size, std::uint64_t seed) {
  model.validate();
  if (body.dim != model.design.d) throw DimensionError("bernstein: body and design dimensions differ");
  if (grid_size < 1) throw ArgumentError("bernstein: grid_size must be >= 1");
  const Vector f_star = project(body, model.regression_vector());
  IntersectionSampler sampler(body, body.diameter());
  Rng rng(seed, "bernstein_grid");
  std::vector<Vector> members;
  members.reserve(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i) members.push_back(sampler(rng));
  return evaluate_members(members, f_star, model, mc_size, seed);
}

BernsteinEstimate bernstein_estimate(const std::vector<Vector>& members, const Model& model,
                                     int mc_size, std::uint64_t seed) {
  model.validate();
  if (members.empty()) throw ArgumentError("bernstein: empty class");
  const Vector t0 = model.regression_vector();
  std::size_t best = 0;
  for (std::size_t i = 1; i < members.size(); ++i) {
    if ((members[i] - t0).squaredNorm() < (members[best] - t0).squaredNorm()) best = i;
  }
  return evaluate_members(members, members[best], model, mc_size, seed);
}

}  // namespace ermlab
