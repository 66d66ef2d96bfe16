#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ermlab/geometry.hpp"
#include "ermlab/rng.hpp"

namespace ermlab {

/// Monte Carlo estimate of E sup_{t in 2T ∩ r B_2} <G, t>.
struct WidthEstimate {
  double r = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  int trials = 0;
};

struct WidthConfig {
  int trials = 400;
  DykstraConfig dykstra{};
  AtomOracle atoms{};  // rows/cols are filled in from the body
};

/// Gaussian draws shared by every radius so that a profile is evaluated with
/// common random numbers.
class GaussianSample {
 public:
  GaussianSample(int dim, int trials, std::uint64_t seed);
  int trials() const { return static_cast<int>(draws_.size()); }
  const Vector& draw(int i) const { return draws_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<Vector> draws_;
};

/// Localized width of 2*body at radius r from a fixed sample. Trial failures
/// are rethrown with the trial index in the message.
WidthEstimate localized_width(const ConvexBody& body, double r, const GaussianSample& sample,
                              const WidthConfig& cfg = {});

WidthEstimate gaussian_width_mc(const ConvexBody& body, double r, int trials, std::uint64_t seed,
                                const WidthConfig& cfg = {});

/// E sup_{t in body} <G, t>, the unlocalized width of the body itself.
WidthEstimate global_width_mc(const ConvexBody& body, int trials, std::uint64_t seed,
                              const WidthConfig& cfg = {});

/// E max_{u, v} <𝔊, u v^T> with 𝔊 having independent N(0, 1/(pq)) entries.
WidthEstimate maxnorm_atom_width(int p, int q, int trials, std::uint64_t seed,
                                 const AtomOracle& oracle = {});

/// Random points of body ∩ r B_2, a mixture of uniform draws from the body
/// (radially shrunk into the ball) and sparse boundary points.
class IntersectionSampler {
 public:
  IntersectionSampler(const ConvexBody& body, double r);
  Vector operator()(Rng& rng) const;

 private:
  Vector uniform_body(Rng& rng) const;
  Vector sparse_boundary(Rng& rng, bool equal_magnitudes) const;
  Vector shrink(Vector t) const;

  ConvexBody body_;
  double r_;
  int sparse_k_;
};

/// Size of a greedily grown eps-separated subset of body ∩ r B_2 built from
/// `budget` candidates; a lower bound on N(body ∩ r B_2, (eps/2) B_2).
int packing_lower(const ConvexBody& body, double r, double eps, int budget, std::uint64_t seed);

struct CoverEstimate {
  int count = 0;
  /// Fraction of fresh validation points not within eps of any center; the
  /// count is an upper bound on the covering number up to this miss rate.
  double uncovered_fraction = 0.0;
  int validation = 0;
};

CoverEstimate covering_upper(const ConvexBody& body, double r, double eps, int budget,
                             std::uint64_t seed);

struct SeparatedSet {
  std::vector<Vector> points;
  double separation = 0.0;  // smallest pairwise l2 distance actually attained
  double guaranteed_separation = 0.0;
  double scale = 0.0;  // every point lies in B_1 ∩ scale * B_2
  int k = 0;
  double log_size = 0.0;
};

/// Greedy Gilbert-Varshamov selection of k-subsets of {0..d-1} with pairwise
/// symmetric difference >= k/2, emitted as (1/k) * sum_{i in I} e_i.
/// Candidates are all k-subsets in lexicographic order when there are at most
/// 200000 of them, otherwise seeded random subsets; selection stops at
/// max_points.
SeparatedSet build_sparse_separated_set(int d, int k, int max_points = 2000,
                                        std::uint64_t seed = 11);

enum class SectionMethod { random_directions, vertex_enum };

struct SectionConfig {
  SectionMethod method = SectionMethod::random_directions;
  int directions = 1000;
  int refine_starts = 8;
  std::uint64_t seed = 7;
};

struct SectionDiameter {
  double diameter = 0.0;  // 2 * max |t|_2 found over ker(X) ∩ body
  Vector argmax;          // the maximizing t (zero when the kernel is trivial)
  int kernel_dim = 0;
};

/// Lower bound on the l2 diameter of ker(X) ∩ body; exact for vertex_enum.
SectionDiameter kernel_section_diameter(const ConvexBody& body, const Matrix& x,
                                        const SectionConfig& cfg = {});

/// Orthonormal basis (columns) of ker(X). Throws NumericalError when a
/// singular value falls in the band where the rank is ambiguous.
Matrix kernel_basis(const Matrix& x, Eigen::Index dim);

}  // namespace ermlab
