#include "reactkd/gromov_wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "reactkd/error.hpp"

namespace reactkd {

void GwConfig::validate() const {
  require(epsilon > 0.0 && outer_iters > 0 && sinkhorn_iters > 0 && tol > 0.0 && restarts >= 0 &&
              polish_iters >= 0,
          ErrorKind::kInvalidArgument, "GW config values must be positive");
}

namespace {

void check_square_symmetric(const Eigen::MatrixXd& s, const char* name) {
  require(s.rows() == s.cols() && s.rows() > 0, ErrorKind::kInvalidArgument,
          std::string(name) + " must be a non-empty square matrix");
  require(s.allFinite(), ErrorKind::kInvalidArgument, std::string(name) + " must be finite");
  require((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-9, ErrorKind::kInvalidArgument,
          std::string(name) + " is not symmetric");
}

void check_plan_shape(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St, const Eigen::MatrixXd& plan) {
  require(plan.rows() == Ss.rows() && plan.cols() == St.rows() && Ss.rows() == Ss.cols() &&
              St.rows() == St.cols(),
          ErrorKind::kInvalidArgument, "plan shape does not match the similarity matrices");
}

// Half the plan gradient for a feasible plan: constC - 2 Ss plan St.
Eigen::MatrixXd tensor_product(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                               const Eigen::MatrixXd& plan) {
  const Eigen::VectorXd p = plan.rowwise().sum();
  const Eigen::VectorXd q = plan.colwise().sum().transpose();
  const Eigen::VectorXd a = Ss.cwiseProduct(Ss) * p;
  const Eigen::VectorXd b = St.cwiseProduct(St) * q;
  Eigen::MatrixXd t = -2.0 * Ss * plan * St;
  t.colwise() += a;
  t.rowwise() += b.transpose();
  return t;
}

struct PolishResult {
  Eigen::MatrixXd plan;
  double cost;
  bool converged;
  int iterations;
};

PolishResult conditional_gradient(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                                  const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
                                  Eigen::MatrixXd plan, const GwConfig& cfg) {
  PolishResult r{std::move(plan), 0.0, false, 0};
  r.cost = gw_objective(Ss, St, r.plan);
  for (int it = 0; it < cfg.polish_iters; ++it) {
    const Eigen::MatrixXd grad = 2.0 * tensor_product(Ss, St, r.plan);
    const Eigen::MatrixXd vertex = exact_transport(grad, mu, nu);
    const Eigen::MatrixXd dir = vertex - r.plan;
    const double slope = (grad.array() * dir.array()).sum();
    r.iterations = it + 1;
    if (-slope <= cfg.tol * std::max(1.0, std::abs(r.cost))) {
      r.converged = true;
      break;
    }
    // Along a marginal-preserving direction the objective is
    // cost + slope * g + curvature * g^2.
    const double curvature = -2.0 * (Ss * dir * St).cwiseProduct(dir).sum();
    double step = 1.0;
    if (curvature > 0.0) step = std::clamp(-slope / (2.0 * curvature), 0.0, 1.0);
    if (step <= 0.0) {
      r.converged = true;
      break;
    }
    r.plan += step * dir;
    r.cost = gw_objective(Ss, St, r.plan);
  }
  return r;
}

}  // namespace

double gw_objective(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St, const Eigen::MatrixXd& plan) {
  check_plan_shape(Ss, St, plan);
  const Eigen::VectorXd p = plan.rowwise().sum();
  const Eigen::VectorXd q = plan.colwise().sum().transpose();
  const double a = p.dot(Ss.cwiseProduct(Ss) * p);
  const double b = q.dot(St.cwiseProduct(St) * q);
  const double c = Ss.cwiseProduct(plan * St * plan.transpose()).sum();
  return a + b - 2.0 * c;
}

Eigen::MatrixXd gw_plan_gradient(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                                 const Eigen::MatrixXd& plan) {
  check_plan_shape(Ss, St, plan);
  return 2.0 * tensor_product(Ss, St, plan);
}

Eigen::MatrixXd gw_source_gradient(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                                   const Eigen::MatrixXd& plan) {
  check_plan_shape(Ss, St, plan);
  const Eigen::VectorXd p = plan.rowwise().sum();
  return 2.0 * (Ss.cwiseProduct(p * p.transpose()) - plan * St * plan.transpose());
}

GwResult gw_discrepancy(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St,
                        const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, const GwConfig& cfg) {
  cfg.validate();
  check_square_symmetric(Ss, "Ss");
  check_square_symmetric(St, "St");
  require(mu.size() == Ss.rows() && nu.size() == St.rows(), ErrorKind::kInvalidArgument,
          "marginal lengths do not match the graph sizes");
  check_simplex(mu, "mu");
  check_simplex(nu, "nu");

  const double inner_tol = std::min(cfg.tol, 1e-9);
  GwResult best;
  Eigen::MatrixXd plan = mu * nu.transpose();
  for (int it = 0; it < cfg.outer_iters; ++it) {
    const SinkhornResult sk =
        sinkhorn_log(tensor_product(Ss, St, plan), cfg.epsilon, mu, nu, cfg.sinkhorn_iters, inner_tol);
    const double change = (sk.plan.matrix - plan).cwiseAbs().maxCoeff();
    plan = sk.plan.matrix;
    best.outer_iterations = it + 1;
    if (change <= cfg.tol) break;
  }

  std::vector<Eigen::MatrixXd> starts;
  starts.push_back(round_to_marginals(plan, mu, nu));
  starts.push_back(mu * nu.transpose());
  if (cfg.restarts > 0) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int r = 0; r < cfg.restarts; ++r) {
      Eigen::MatrixXd k(mu.size(), nu.size());
      for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = unif(rng);
      starts.push_back(round_to_marginals(sinkhorn_project(k, mu, nu, 1000, 1e-12).plan.matrix, mu, nu));
    }
  }

  bool have = false;
  for (auto& start : starts) {
    PolishResult pr = conditional_gradient(Ss, St, mu, nu, std::move(start), cfg);
    if (!have || pr.cost < best.cost - 1e-15) {
      have = true;
      best.cost = pr.cost;
      best.plan.matrix = std::move(pr.plan);
      best.converged = pr.converged;
      best.polish_iterations = pr.iterations;
    }
  }
  best.plan.row_marginal = mu;
  best.plan.col_marginal = nu;
  // The objective is a sum of squares; clamp rounding noise below zero.
  best.cost = std::max(0.0, gw_objective(Ss, St, best.plan.matrix));
  if (best.plan.marginal_residual() > 1e-8) best.converged = false;
  return best;
}

GwResult gw_discrepancy(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St, const GwConfig& cfg) {
  return gw_discrepancy(Ss, St, uniform_marginal(Ss.rows()), uniform_marginal(St.rows()), cfg);
}

}  // namespace reactkd
