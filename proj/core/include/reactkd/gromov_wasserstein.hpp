#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "reactkd/transport.hpp"

namespace reactkd {

struct GwConfig {
  double epsilon = 0.05;   // entropic regularization of the mirror-descent stage
  int outer_iters = 100;
  int sinkhorn_iters = 200;
  double tol = 1e-7;
  std::uint64_t seed = 0;  // used only by random restarts
  int restarts = 0;        // extra seeded random starting couplings
  int polish_iters = 1000;  // conditional-gradient iterations on the exact objective

  void validate() const;
};

struct GwResult {
  double cost = 0.0;
  TransportPlan plan;
  bool converged = false;
  int outer_iterations = 0;
  int polish_iterations = 0;
};

// sum_{i,j,k,l} (Ss_ij - St_kl)^2 plan_ik plan_jl, evaluated through the
// plan's own marginals p = plan 1, q = plan^T 1:
//   p^T (Ss o Ss) p + q^T (St o St) q - 2 <Ss, plan St plan^T>.
double gw_objective(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                    const Eigen::MatrixXd& plan);

// Gradient of gw_objective with respect to the plan (symmetric Ss, St).
Eigen::MatrixXd gw_plan_gradient(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                                 const Eigen::MatrixXd& plan);

// Gradient of gw_objective with respect to Ss at a fixed plan.
Eigen::MatrixXd gw_source_gradient(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                                   const Eigen::MatrixXd& plan);

// Local minimizer of the Gromov-Wasserstein objective over couplings of
// (mu, nu). An entropic mirror-descent stage (Sinkhorn projections of
// exp(-gradient / epsilon)) from the product coupling is rounded onto the
// exact polytope and polished by conditional gradient with exact transport
// oracles and exact line search. The product coupling and any seeded random
// restarts are polished the same way; the lowest objective wins.
GwResult gw_discrepancy(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                        const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
                        const GwConfig& cfg = {});

// Uniform marginals.
GwResult gw_discrepancy(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                        const GwConfig& cfg = {});

}  // namespace reactkd
