#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ermlab/types.hpp"

namespace ermlab {

enum class BodyKind { l1_ball, l2_ball, linf_ball, maxnorm_ball };

std::string to_string(BodyKind kind);
BodyKind body_kind_from_string(std::string_view name);

/// Symmetric convex body T in R^dim indexing the linear class {<t, .> : t in T}.
/// For the max-norm ball the vectors are row-major flattened p x q matrices.
struct ConvexBody {
  BodyKind kind = BodyKind::l1_ball;
  int dim = 1;
  int rows = 0;  // maxnorm only
  int cols = 0;  // maxnorm only
  double radius = 1.0;

  static ConvexBody l1(int d, double radius = 1.0);
  static ConvexBody l2(int d, double radius = 1.0);
  static ConvexBody linf(int d, double radius = 1.0);
  static ConvexBody maxnorm(int p, int q, double radius = 1.0);

  ConvexBody scaled(double factor) const;

  /// Euclidean (= L2 under isotropy) diameter of the body.
  double diameter() const;
};

struct SupportResult {
  double value = 0.0;
  Vector argmax;
};

/// Linear maximization over the sign atoms {u v^T : u in {+-1}^p, v in {+-1}^q}.
struct AtomOracle {
  int rows = 1;
  int cols = 1;
  double grothendieck = 1.783;  // sandwich constant used by support() on maxnorm
  int brute_force_cap = 22;     // exact enumeration when rows + cols <= cap
  int restarts = 20;
  std::uint64_t seed = 0x5eed;

  struct Atom {
    Eigen::VectorXd u;
    Eigen::VectorXd v;
    double value = 0.0;  // u^T G v
    bool exact = false;
  };

  /// Maximizes u^T G v. `g` is the row-major flattened rows x cols matrix.
  Atom maximize(const Vector& g) const;

  static Vector flatten(const Eigen::VectorXd& u, const Eigen::VectorXd& v);
};

/// Euclidean projection. Rejects maxnorm (no Euclidean projection is attempted
/// for that body; the factorized solver enforces feasibility instead).
Vector project(const ConvexBody& body, const Vector& x);

/// sup over the body of <g, t>. For maxnorm this is the upper value
/// K_G * radius * max_atom <g, atom>, with the scaled atom as argmax.
SupportResult support(const ConvexBody& body, const Vector& g,
                      const AtomOracle* oracle = nullptr);

struct DykstraConfig {
  int max_iter = 200000;
  double tol = 1e-8;
};

/// sup of <g, t> over body ∩ r B_2.
///   l1: exact soft-threshold breakpoint search.
///   l2: closed form min(radius, r) * |g|_2.
///   linf: exact water-filling over the capped coordinates.
///   maxnorm: min(support(g), r |g|_2), an upper value.
SupportResult support_intersection(const ConvexBody& body, double r, const Vector& g,
                                   const DykstraConfig& cfg = {},
                                   const AtomOracle* oracle = nullptr);

/// Projected gradient ascent with Dykstra projections for any projectable
/// body; the cross-check for the closed forms.
SupportResult support_intersection_iterative(const ConvexBody& body, double r,
                                             const Vector& g,
                                             const DykstraConfig& cfg = {});

/// Euclidean projection onto body ∩ r B_2 by Dykstra's alternating projections.
/// Throws ConvergenceError when the iteration cap is reached.
Vector project_intersection(const ConvexBody& body, double r, const Vector& x,
                            const DykstraConfig& cfg = {});

/// Minkowski gauge of the body at x. For maxnorm this is an upper bound on the
/// max-norm (from a balanced SVD factorization) divided by the radius.
double gauge(const ConvexBody& body, const Vector& x);

bool membership(const ConvexBody& body, const Vector& x, double tol = 1e-9);

/// max_i |row_i(U)|_2 * max_j |row_j(V)|_2, the factorization bound on |U V^T|_max.
double factorization_maxnorm_bound(const Matrix& u, const Matrix& v);

}  // namespace ermlab
