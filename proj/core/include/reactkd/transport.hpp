#pragma once

#include <Eigen/Dense>

namespace reactkd {

// Coupling with prescribed marginals.
struct TransportPlan {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd row_marginal;
  Eigen::VectorXd col_marginal;

  // Largest absolute deviation of row or column sums from the marginals.
  double marginal_residual() const;
};

struct SinkhornResult {
  TransportPlan plan;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
};

// Throws kInvalidArgument unless `w` is a nonnegative vector summing to 1
// within 1e-9.
void check_simplex(const Eigen::VectorXd& w, const char* name);

Eigen::VectorXd uniform_marginal(Eigen::Index n);

// Alternating row/column scaling of a strictly positive kernel. Stops once the
// marginal residual is <= tol (converged) or after `iters` sweeps.
SinkhornResult sinkhorn_project(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& nu, int iters, double tol);

// Entropic transport for kernel exp(-cost / epsilon), iterated on dual
// potentials in the log domain so that large cost ranges cannot underflow.
SinkhornResult sinkhorn_log(const Eigen::MatrixXd& cost, double epsilon,
                            const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, int iters,
                            double tol);

// Moves a nonnegative matrix onto the exact transport polytope by scaling rows
// and columns down to their marginals and redistributing the deficit as a
// rank-one correction.
Eigen::MatrixXd round_to_marginals(const Eigen::MatrixXd& plan, const Eigen::VectorXd& mu,
                                   const Eigen::VectorXd& nu);

// Unregularized optimal transport (min <cost, plan>) by successive shortest
// augmenting paths. Intended for the small node counts of region graphs.
Eigen::MatrixXd exact_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& nu);

}  // namespace reactkd
