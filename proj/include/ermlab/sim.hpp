#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ermlab/geometry.hpp"
#include "ermlab/rng.hpp"

namespace ermlab {

enum class DesignKind { gaussian, rademacher, uniform_cube, unconditional_bounded, matrix_iid };

std::string to_string(DesignKind kind);
DesignKind design_kind_from_string(std::string_view name);

/// Isotropic subgaussian design on R^d (for matrix_iid, d = p * q and rows are
/// row-major flattened matrices with independent standard gaussian entries).
struct DesignSpec {
  DesignKind kind = DesignKind::gaussian;
  int d = 1;
  int p = 0;
  int q = 0;
  double L = 1.0;  // claimed subgaussian constant, metadata only

  static DesignSpec make(DesignKind kind, int d);
  static DesignSpec matrix(int p, int q);

  void validate() const;
  /// Fills one row with independent coordinates.
  void sample_row(Rng& rng, Eigen::Ref<Vector> row) const;
};

enum class NoiseKind { gaussian_noise, orthogonal_target };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian_noise;
  double sigma = 1.0;  // noise std; metadata for orthogonal_target (Y ~ N(0, 1))
};

struct Model {
  DesignSpec design;
  NoiseSpec noise;
  std::optional<Vector> t_star;  // required for gaussian_noise

  void validate() const;
  /// Regression vector t0 with E[Y | X] = <t0, X> (zero for orthogonal_target).
  Vector regression_vector() const;
};

struct DatasetMeta {
  DesignKind design = DesignKind::gaussian;
  NoiseKind noise = NoiseKind::gaussian_noise;
  double sigma = 0.0;
  std::optional<Vector> t_star;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix X;  // N x d
  Vector Y;  // N
  DatasetMeta meta;

  int N() const { return static_cast<int>(X.rows()); }
  int dim() const { return static_cast<int>(X.cols()); }
  /// Throws DimensionError on inconsistent shapes, ArgumentError on non-finite entries.
  void validate() const;
};

/// Rows are i.i.d.; row i draws from its own stream derived from (seed, i).
Dataset sample_dataset(const DesignSpec& design, const NoiseSpec& noise,
                       const std::optional<Vector>& t_star, int N, std::uint64_t seed);
Dataset sample_dataset(const Model& model, int N, std::uint64_t seed);

/// max over p in {2..p_max} of (mean |x|^p)^(1/p) / sqrt(p).
double psi2_estimate(const std::vector<double>& samples, int p_max = 10);
double psi2_estimate(const Vector& samples, int p_max = 10);

struct BernsteinEstimate {
  double ratio = 0.0;     // sup over the grid of |f - f*|^2 / PL_f, closed form
  double mc_ratio = 0.0;  // same sup with both moments from a fresh sample (NaN if mc_size = 0)
  int evaluated = 0;      // grid members with f != f*
  Vector f_star;
};

/// Closed-form ratio for one member under an isotropic design with E[Y|X] = <t0, X>:
/// PL_t = |t - t0|^2 - |f* - t0|^2.
double bernstein_ratio(const Vector& t, const Vector& f_star, const Vector& t0);

/// Grid members are drawn from the body (sparse boundary points and interior
/// points); f* is the Euclidean projection of the regression vector.
BernsteinEstimate bernstein_estimate(const ConvexBody& body, const Model& model, int grid_size,
                                     int mc_size, std::uint64_t seed);

/// Finite class version; f* is the nearest member to the regression vector
/// (first one on ties).
BernsteinEstimate bernstein_estimate(const std::vector<Vector>& members, const Model& model,
                                     int mc_size, std::uint64_t seed);

}  // namespace ermlab
