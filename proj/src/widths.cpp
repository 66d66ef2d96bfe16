#include "ermlab/widths.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "ermlab/parallel.hpp"

namespace ermlab {
namespace {

WidthEstimate summarize(double r, const std::vector<double>& values) {
  WidthEstimate est;
  est.r = r;
  est.trials = static_cast<int>(values.size());
  if (values.empty()) return est;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  est.mean = mean;
  est.std_error = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return est;
}

AtomOracle oracle_for(const ConvexBody& body, const AtomOracle& base) {
  AtomOracle o = base;
  o.rows = body.rows;
  o.cols = body.cols;
  return o;
}

// Random k-subset of {0..d-1} as sorted indices.
std::vector<int> random_subset(Rng& rng, int d, int k) {
  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.index(static_cast<std::size_t>(d - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

using Bits = std::vector<std::uint64_t>;

int hamming(const Bits& a, const Bits& b) {
  int h = 0;
  for (std::size_t w = 0; w < a.size(); ++w) h += std::popcount(a[w] ^ b[w]);
  return h;
}

Bits to_bits(const std::vector<int>& subset, int d) {
  Bits b(static_cast<std::size_t>((d + 63) / 64), 0);
  for (int i : subset) b[static_cast<std::size_t>(i / 64)] |= std::uint64_t{1} << (i % 64);
  return b;
}

}  // namespace

GaussianSample::GaussianSample(int dim, int trials, std::uint64_t seed)
    : draws_(static_cast<std::size_t>(std::max(trials, 0))) {
  parallel_for(draws_.size(), [&](std::size_t i) {
    Rng rng(seed, "gaussian_width", i);
    draws_[i] = rng.gaussian_vector(dim);
  });
}

WidthEstimate localized_width(const ConvexBody& body, double r, const GaussianSample& sample,
                              const WidthConfig& cfg) {
  if (sample.trials() < 2) throw ArgumentError("gaussian width: trials must be >= 2");
  if (r < 0.0) throw ArgumentError("gaussian width: r must be nonnegative");
  if (r == 0.0) {
    WidthEstimate est;
    est.trials = sample.trials();
    return est;
  }
  const ConvexBody doubled = body.scaled(2.0);
  const AtomOracle oracle = oracle_for(body, cfg.atoms);
  std::vector<double> values(static_cast<std::size_t>(sample.trials()));
  parallel_for(values.size(), [&](std::size_t i) {
    try {
      values[i] = support_intersection(doubled, r, sample.draw(static_cast<int>(i)), cfg.dykstra,
                                       &oracle)
                      .value;
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("width trial " + std::to_string(i) + ": " + e.what(), e.residual());
    }
  });
  return summarize(r, values);
}

WidthEstimate gaussian_width_mc(const ConvexBody& body, double r, int trials, std::uint64_t seed,
                                const WidthConfig& cfg) {
  if (trials < 2) throw ArgumentError("gaussian_width_mc: trials must be >= 2");
  const GaussianSample sample(body.dim, trials, seed);
  return localized_width(body, r, sample, cfg);
}

WidthEstimate global_width_mc(const ConvexBody& body, int trials, std::uint64_t seed,
                              const WidthConfig& cfg) {
  if (trials < 2) throw ArgumentError("global_width_mc: trials must be >= 2");
  const GaussianSample sample(body.dim, trials, seed);
  const AtomOracle oracle = oracle_for(body, cfg.atoms);
  std::vector<double> values(static_cast<std::size_t>(trials));
  parallel_for(values.size(), [&](std::size_t i) {
    values[i] = support(body, sample.draw(static_cast<int>(i)), &oracle).value;
  });
  return summarize(std::numeric_limits<double>::infinity(), values);
}

WidthEstimate maxnorm_atom_width(int p, int q, int trials, std::uint64_t seed,
                                 const AtomOracle& oracle) {
  if (trials < 2) throw ArgumentError("maxnorm_atom_width: trials must be >= 2");
  AtomOracle o = oracle;
  o.rows = p;
  o.cols = q;
  const double scale = 1.0 / std::sqrt(static_cast<double>(p) * q);
  std::vector<double> values(static_cast<std::size_t>(trials));
  parallel_for(values.size(), [&](std::size_t i) {
    Rng rng(seed, "atom_width", i);
    values[i] = o.maximize(rng.gaussian_vector(p * q) * scale).value;
  });
  return summarize(std::numeric_limits<double>::infinity(), values);
}

IntersectionSampler::IntersectionSampler(const ConvexBody& body, double r)
    : body_(body), r_(r), sparse_k_(1) {
  if (r <= 0.0) throw ArgumentError("IntersectionSampler: r must be positive");
  if (body.kind == BodyKind::l1_ball) {
    const double ratio = body.radius / r;
    sparse_k_ = std::clamp(static_cast<int>(std::ceil(ratio * ratio - 1e-12)), 1, body.dim);
  }
}

Vector IntersectionSampler::shrink(Vector t) const {
  const double n = t.norm();
  if (n > r_) t *= r_ / n;
  return t;
}

Vector IntersectionSampler::uniform_body(Rng& rng) const {
  const int d = body_.dim;
  Vector t(d);
  switch (body_.kind) {
    case BodyKind::l1_ball: {
      double total = -std::log(1.0 - rng.uniform());
      for (int i = 0; i < d; ++i) {
        t[i] = -std::log(1.0 - rng.uniform());
        total += t[i];
      }
      for (int i = 0; i < d; ++i) t[i] *= rng.rademacher() * body_.radius / total;
      return t;
    }
    case BodyKind::l2_ball: {
      t = rng.gaussian_vector(d);
      const double radial = std::pow(rng.uniform(), 1.0 / d);
      return t * (body_.radius * radial / t.norm());
    }
    case BodyKind::linf_ball: {
      for (int i = 0; i < d; ++i) t[i] = body_.radius * (2.0 * rng.uniform() - 1.0);
      return t;
    }
    case BodyKind::maxnorm_ball: {
      const int k = std::min(body_.rows, body_.cols);
      Matrix u(body_.rows, k);
      Matrix v(body_.cols, k);
      for (int i = 0; i < body_.rows; ++i) {
        Vector row = rng.gaussian_vector(k);
        u.row(i) = row.transpose() / row.norm();
      }
      for (int j = 0; j < body_.cols; ++j) {
        Vector row = rng.gaussian_vector(k);
        v.row(j) = row.transpose() / row.norm();
      }
      const Matrix a = u * v.transpose();
      for (int i = 0; i < body_.rows; ++i) {
        for (int j = 0; j < body_.cols; ++j) t[i * body_.cols + j] = body_.radius * a(i, j);
      }
      return t;
    }
  }
  return t;
}

Vector IntersectionSampler::sparse_boundary(Rng& rng, bool equal_magnitudes) const {
  const int d = body_.dim;
  Vector t = Vector::Zero(d);
  switch (body_.kind) {
    case BodyKind::l1_ball: {
      const int k = equal_magnitudes
                        ? sparse_k_
                        : std::min(d, sparse_k_ + static_cast<int>(rng.index(
                                                      static_cast<std::size_t>(sparse_k_) + 1)));
      for (int i : random_subset(rng, d, k)) {
        t[i] = equal_magnitudes ? rng.rademacher() : rng.gaussian();
      }
      const double n1 = t.lpNorm<1>();
      const double n2 = t.norm();
      return t * std::min(body_.radius / n1, r_ / n2);
    }
    case BodyKind::l2_ball: {
      t = rng.gaussian_vector(d);
      return t * (std::min(body_.radius, r_) / t.norm());
    }
    case BodyKind::linf_ball: {
      for (int i = 0; i < d; ++i) t[i] = body_.radius * rng.rademacher();
      return shrink(t);
    }
    case BodyKind::maxnorm_ball: {
      Eigen::VectorXd u(body_.rows);
      Eigen::VectorXd v(body_.cols);
      for (int i = 0; i < body_.rows; ++i) u[i] = rng.rademacher();
      for (int j = 0; j < body_.cols; ++j) v[j] = rng.rademacher();
      return shrink(body_.radius * AtomOracle::flatten(u, v));
    }
  }
  return t;
}

Vector IntersectionSampler::operator()(Rng& rng) const {
  const double pick = rng.uniform();
  if (pick < 1.0 / 3.0) return shrink(uniform_body(rng));
  if (pick < 2.0 / 3.0) return sparse_boundary(rng, true);
  return sparse_boundary(rng, false);
}

int packing_lower(const ConvexBody& body, double r, double eps, int budget, std::uint64_t seed) {
  if (eps <= 0.0) throw ArgumentError("packing_lower: eps must be positive");
  const IntersectionSampler sampler(body, r);
  Rng rng(seed, "packing");
  std::vector<Vector> candidates;
  for (int i = 0; i < std::max(budget, 1); ++i) candidates.push_back(sampler(rng));
  // Outermost candidates first: boundary layers fill before the interior.
  std::vector<double> norms;
  for (const auto& c : candidates) norms.push_back(c.norm());
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
  std::vector<Vector> accepted;
  const double eps2 = eps * eps;
  for (std::size_t i : order) {
    Vector& c = candidates[i];
    const bool separated = std::all_of(accepted.begin(), accepted.end(), [&](const Vector& a) {
      return (a - c).squaredNorm() >= eps2;
    });
    if (separated) accepted.push_back(std::move(c));
  }
  return static_cast<int>(accepted.size());
}

CoverEstimate covering_upper(const ConvexBody& body, double r, double eps, int budget,
                             std::uint64_t seed) {
  if (eps <= 0.0) throw ArgumentError("covering_upper: eps must be positive");
  const IntersectionSampler sampler(body, r);
  Rng rng(seed, "cover");
  std::vector<Vector> centers;
  const double eps2 = eps * eps;
  auto covered = [&](const Vector& x) {
    return std::any_of(centers.begin(), centers.end(),
                       [&](const Vector& c) { return (c - x).squaredNorm() <= eps2; });
  };
  for (int i = 0; i < std::max(budget, 1); ++i) {
    Vector x = sampler(rng);
    if (!covered(x)) centers.push_back(std::move(x));
  }
  CoverEstimate out;
  out.count = static_cast<int>(centers.size());
  out.validation = std::max(budget / 4, 1);
  Rng check(seed, "cover_validation");
  int missed = 0;
  for (int i = 0; i < out.validation; ++i) missed += covered(sampler(check)) ? 0 : 1;
  out.uncovered_fraction = static_cast<double>(missed) / out.validation;
  return out;
}

SeparatedSet build_sparse_separated_set(int d, int k, int max_points, std::uint64_t seed) {
  if (k < 1 || 4 * k > d) {
    throw ArgumentError("build_sparse_separated_set: need 1 <= k <= d/4 (d=" + std::to_string(d) +
                        ", k=" + std::to_string(k) + ")");
  }
  const int min_hamming = (k + 1) / 2;  // ceil(k/2)
  std::vector<Bits> chosen_bits;
  std::vector<std::vector<int>> chosen;

  auto offer = [&](const std::vector<int>& subset) {
    Bits b = to_bits(subset, d);
    for (const auto& c : chosen_bits) {
      if (hamming(c, b) < min_hamming) return;
    }
    chosen_bits.push_back(std::move(b));
    chosen.push_back(subset);
  };

  if (binomial(d, k) <= 200000.0) {
    std::vector<int> subset(k);
    std::iota(subset.begin(), subset.end(), 0);
    while (static_cast<int>(chosen.size()) < max_points) {
      offer(subset);
      int i = k - 1;
      while (i >= 0 && subset[i] == d - k + i) --i;
      if (i < 0) break;
      ++subset[i];
      for (int j = i + 1; j < k; ++j) subset[j] = subset[j - 1] + 1;
    }
  } else {
    Rng rng(seed, "separated_set");
    const long budget = 50L * max_points;
    for (long i = 0; i < budget && static_cast<int>(chosen.size()) < max_points; ++i) {
      offer(random_subset(rng, d, k));
    }
  }

  SeparatedSet out;
  out.k = k;
  out.scale = 1.0 / std::sqrt(static_cast<double>(k));
  const double coef = 1.0 / k;
  out.guaranteed_separation = coef * std::sqrt(static_cast<double>(min_hamming));
  for (const auto& subset : chosen) {
    Vector p = Vector::Zero(d);
    for (int i : subset) p[i] = coef;
    out.points.push_back(std::move(p));
  }
  int min_h = std::numeric_limits<int>::max();
  for (std::size_t a = 0; a < chosen_bits.size(); ++a) {
    for (std::size_t b = a + 1; b < chosen_bits.size(); ++b) {
      min_h = std::min(min_h, hamming(chosen_bits[a], chosen_bits[b]));
    }
  }
  out.separation = chosen_bits.size() > 1 ? coef * std::sqrt(static_cast<double>(min_h)) : 0.0;
  out.log_size = std::log(static_cast<double>(out.points.size()));
  return out;
}

Matrix kernel_basis(const Matrix& x, Eigen::Index dim) {
  if (x.cols() != dim) {
    throw DimensionError("kernel_basis: design has " + std::to_string(x.cols()) +
                         " columns, expected " + std::to_string(dim));
  }
  if (x.rows() == 0) return Matrix::Identity(dim, dim);
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() ? s.maxCoeff() : 0.0;
  if (smax == 0.0) return Matrix::Identity(dim, dim);
  const double thr = 1e-10 * static_cast<double>(std::max(x.rows(), x.cols())) * smax;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > thr) {
      ++rank;
      if (s[i] < 1e3 * thr) {
        throw NumericalError("kernel_basis: rank detection is ambiguous (singular value " +
                             std::to_string(s[i]) + ")");
      }
    } else if (s[i] > 1e-3 * thr) {
      throw NumericalError("kernel_basis: rank detection is ambiguous (singular value " +
                           std::to_string(s[i]) + ")");
    }
  }
  return svd.matrixV().rightCols(dim - rank);
}

SectionDiameter kernel_section_diameter(const ConvexBody& body, const Matrix& x,
                                        const SectionConfig& cfg) {
  if (body.kind == BodyKind::maxnorm_ball) {
    throw UnsupportedError("kernel_section_diameter: max-norm body has no exact gauge");
  }
  const Matrix basis = kernel_basis(x, body.dim);
  SectionDiameter out;
  out.kernel_dim = static_cast<int>(basis.cols());
  out.argmax = Vector::Zero(body.dim);
  if (basis.cols() == 0) return out;

  if (cfg.method == SectionMethod::vertex_enum) {
    if (body.kind != BodyKind::l1_ball) {
      throw UnsupportedError("kernel_section_diameter: vertex_enum supports l1_ball only");
    }
    if (body.dim > 12) throw UnsupportedError("kernel_section_diameter: vertex_enum needs d <= 12");
    // Vertices of ker ∩ R B_1 have at most rank + 1 nonzeros; every support
    // whose restricted kernel is one-dimensional gives a candidate.
    const int d = body.dim;
    const int rank = d - out.kernel_dim;
    double best = -1.0;
    for (std::uint32_t mask = 1; mask < (1U << d); ++mask) {
      const int size = std::popcount(mask);
      if (size > rank + 1) continue;
      std::vector<int> cols;
      for (int i = 0; i < d; ++i) {
        if (mask & (1U << i)) cols.push_back(i);
      }
      Matrix sub(x.rows(), size);
      for (int j = 0; j < size; ++j) sub.col(j) = x.col(cols[j]);
      Matrix null;
      try {
        null = kernel_basis(sub, size);
      } catch (const NumericalError&) {
        continue;
      }
      if (null.cols() != 1) continue;
      Vector t = Vector::Zero(d);
      for (int j = 0; j < size; ++j) t[cols[j]] = null(j, 0);
      t *= body.radius / t.lpNorm<1>();
      const double n = t.norm();
      if (n > best) {
        best = n;
        out.argmax = t;
      }
    }
    out.diameter = 2.0 * std::max(best, 0.0);
    return out;
  }

  // Radial extent along a unit kernel direction w is 1 / gauge(w); the maximum
  // over directions equals the maximum norm over the section.
  auto extent = [&](const Vector& coef) {
    const Vector w = basis * (coef / coef.norm());
    return 1.0 / gauge(body, w);
  };
  std::vector<std::pair<double, Vector>> starts;
  for (Eigen::Index i = 0; i < basis.rows(); ++i) {
    const Vector coef = basis.row(i).transpose();
    if (coef.norm() > 1e-12) starts.emplace_back(extent(coef), coef / coef.norm());
  }
  Rng rng(cfg.seed, "section_directions");
  for (int i = 0; i < cfg.directions; ++i) {
    Vector coef = rng.gaussian_vector(basis.cols());
    coef /= coef.norm();
    starts.emplace_back(extent(coef), coef);
  }
  std::sort(starts.begin(), starts.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  starts.resize(std::min<std::size_t>(starts.size(), static_cast<std::size_t>(cfg.refine_starts)));

  double best = 0.0;
  Vector best_coef = starts.front().second;
  for (auto& [value, coef] : starts) {
    double step = 0.3;
    int failures = 0;
    for (int it = 0; it < 400 && step > 1e-9; ++it) {
      Vector trial = coef + step * rng.gaussian_vector(coef.size()) / std::sqrt(coef.size());
      trial /= trial.norm();
      const double v = extent(trial);
      if (v > value) {
        value = v;
        coef = trial;
        failures = 0;
      } else if (++failures >= 6) {
        step *= 0.5;
        failures = 0;
      }
    }
    if (value > best) {
      best = value;
      best_coef = coef;
    }
  }
  const Vector w = basis * best_coef;
  out.argmax = w / gauge(body, w);
  out.diameter = 2.0 * out.argmax.norm();
  return out;
}

}  // namespace ermlab
