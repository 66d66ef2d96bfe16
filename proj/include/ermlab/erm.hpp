#pragma once

#include <cstdint>
#include <string>

#include "ermlab/geometry.hpp"
#include "ermlab/sim.hpp"

namespace ermlab {

struct ErmConfig {
  int max_iter = 20000;
  double tol = 1e-8;  // projected-gradient (gradient mapping) norm
  int power_iters = 30;

  // Frank-Wolfe over conv(scale * X±).
  int fw_iters = 20000;
  double gap_tol = 1e-7;
  double fw_scale = 1.0;

  // Factorized max-norm solver.
  int restarts = 8;
  int factor_iters = 4000;
  double factor_tol = 1e-9;  // relative objective decrease that ends a restart
  double maxnorm_radius = 1.0;
  std::uint64_t seed = 1;

  int holdout = 20000;
};

struct ErmSolution {
  Vector t_hat;
  double empirical_risk = 0.0;
  int iterations = 0;
  std::string solver;
  double certificate = 0.0;  // gradient-mapping norm, or Frank-Wolfe duality gap
  bool converged = false;
  double gauge = 0.0;  // solver's own feasibility measure (<= 1 means feasible)
};

/// (1/N) sum (Y_i - <X_i, t>)^2.
double empirical_risk(const Dataset& data, const Vector& t);

/// Accelerated projected gradient with a monotone safeguard and backtracking,
/// run on the Gram form of the empirical risk. Throws ConvergenceError at the
/// iteration cap.
ErmSolution erm_linear(const ConvexBody& body, const Dataset& data, const ErmConfig& cfg = {});

/// Away-step Frank-Wolfe with exact line search over conv(cfg.fw_scale * X±).
/// Throws ConvergenceError when the gap is still above cfg.gap_tol after fw_iters.
ErmSolution erm_frank_wolfe_atoms(const AtomOracle& oracle, const Dataset& data,
                                  const ErmConfig& cfg = {});

/// Alternating projected gradient on A = U V^T, U (p x k), V (q x k), every row
/// of U and V in the ball of radius sqrt(cfg.maxnorm_radius). Best of
/// cfg.restarts seeded starts; ties go to the lower restart index.
ErmSolution erm_maxnorm_factorized(int p, int q, const Dataset& data, int rank_k = 0,
                                   const ErmConfig& cfg = {});

struct ExcessRisk {
  double value = 0.0;
  double std_error = 0.0;  // 0 for closed forms
  bool closed_form = true;
};

/// Population excess risk of <t_hat, .> for an isotropic design:
/// |t_hat - t*|^2 under gaussian noise with t* in the class, |t_hat|^2 for the
/// orthogonal target.
ExcessRisk excess_risk(const Vector& t_hat, const Model& model);
ExcessRisk excess_risk(const ErmSolution& solution, const Model& model);

/// Fresh-sample estimate of E[(<t_hat,X> - Y)^2 - (<f_ref,X> - Y)^2].
ExcessRisk excess_risk_holdout(const Vector& t_hat, const Vector& f_ref, const Model& model,
                               int holdout, std::uint64_t seed);

}  // namespace ermlab
