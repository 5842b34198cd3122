#include "reactkd/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "reactkd/error.hpp"

namespace reactkd {

double TransportPlan::marginal_residual() const {
  const double rows = (matrix.rowwise().sum() - row_marginal).cwiseAbs().maxCoeff();
  const double cols = (matrix.colwise().sum().transpose() - col_marginal).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

void check_simplex(const Eigen::VectorXd& w, const char* name) {
  require(w.size() > 0, ErrorKind::kInvalidArgument, std::string(name) + " is empty");
  require(w.allFinite() && w.minCoeff() >= 0.0, ErrorKind::kInvalidArgument,
          std::string(name) + " must be finite and nonnegative");
  require(std::abs(w.sum() - 1.0) <= 1e-9, ErrorKind::kInvalidArgument,
          std::string(name) + " must sum to 1");
}

Eigen::VectorXd uniform_marginal(Eigen::Index n) {
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

SinkhornResult sinkhorn_project(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& nu, int iters, double tol) {
  check_simplex(mu, "mu");
  check_simplex(nu, "nu");
  require(kernel.rows() == mu.size() && kernel.cols() == nu.size(), ErrorKind::kInvalidArgument,
          "kernel shape does not match marginals");
  require(kernel.allFinite() && kernel.minCoeff() > 0.0, ErrorKind::kInvalidArgument,
          "sinkhorn kernel must be strictly positive");
  require(iters >= 1 && tol > 0.0, ErrorKind::kInvalidArgument, "sinkhorn needs iters >= 1, tol > 0");

  Eigen::VectorXd u = Eigen::VectorXd::Ones(mu.size());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(nu.size());
  SinkhornResult res;
  res.plan.row_marginal = mu;
  res.plan.col_marginal = nu;
  for (int it = 1; it <= iters; ++it) {
    u = mu.cwiseQuotient(kernel * v);
    v = nu.cwiseQuotient(kernel.transpose() * u);
    res.iterations = it;
    res.plan.matrix = u.asDiagonal() * kernel * v.asDiagonal();
    res.residual = res.plan.marginal_residual();
    if (res.residual <= tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

namespace {

double log_sum_exp(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

}  // namespace

SinkhornResult sinkhorn_log(const Eigen::MatrixXd& cost, double epsilon,
                            const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, int iters,
                            double tol) {
  check_simplex(mu, "mu");
  check_simplex(nu, "nu");
  require(cost.rows() == mu.size() && cost.cols() == nu.size(), ErrorKind::kInvalidArgument,
          "cost shape does not match marginals");
  require(cost.allFinite(), ErrorKind::kInvalidArgument, "cost must be finite");
  require(epsilon > 0.0 && iters >= 1 && tol > 0.0, ErrorKind::kInvalidArgument,
          "sinkhorn needs epsilon > 0, iters >= 1, tol > 0");

  const Eigen::Index n = mu.size(), m = nu.size();
  const Eigen::ArrayXd log_mu = mu.array().log();
  const Eigen::ArrayXd log_nu = nu.array().log();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
  SinkhornResult res;
  res.plan.row_marginal = mu;
  res.plan.col_marginal = nu;
  Eigen::VectorXd tmp;
  for (int it = 1; it <= iters; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      tmp = (g.array() - cost.row(i).transpose().array()) / epsilon;
      f(i) = mu(i) > 0.0 ? epsilon * (log_mu(i) - log_sum_exp(tmp)) : -std::numeric_limits<double>::infinity();
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      tmp = (f.array() - cost.col(j).array()) / epsilon;
      g(j) = nu(j) > 0.0 ? epsilon * (log_nu(j) - log_sum_exp(tmp)) : -std::numeric_limits<double>::infinity();
    }
    res.iterations = it;
    res.plan.matrix.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        const double e = (f(i) + g(j) - cost(i, j)) / epsilon;
        res.plan.matrix(i, j) = std::isfinite(e) ? std::exp(e) : 0.0;
      }
    res.residual = res.plan.marginal_residual();
    if (res.residual <= tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

Eigen::MatrixXd round_to_marginals(const Eigen::MatrixXd& plan, const Eigen::VectorXd& mu,
                                   const Eigen::VectorXd& nu) {
  Eigen::MatrixXd x = plan.cwiseMax(0.0);
  const Eigen::VectorXd rows = x.rowwise().sum();
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (rows(i) > mu(i)) x.row(i) *= mu(i) / rows(i);
  const Eigen::VectorXd cols = x.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (cols(j) > nu(j)) x.col(j) *= nu(j) / cols(j);
  const Eigen::VectorXd err_r = (mu - x.rowwise().sum()).cwiseMax(0.0);
  const Eigen::VectorXd err_c = (nu - x.colwise().sum().transpose()).cwiseMax(0.0);
  const double mass = err_r.sum();
  if (mass > 0.0) x += err_r * err_c.transpose() / mass;
  return x;
}

Eigen::MatrixXd exact_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& nu) {
  require(cost.rows() == mu.size() && cost.cols() == nu.size(), ErrorKind::kInvalidArgument,
          "cost shape does not match marginals");
  require(cost.allFinite(), ErrorKind::kInvalidArgument, "cost must be finite");
  const int n = static_cast<int>(mu.size());
  const int m = static_cast<int>(nu.size());
  // Nodes: 0 = source, 1..n = rows, n+1..n+m = columns, n+m+1 = sink.
  struct Arc {
    int to;
    int rev;
    double cap;
    double cost;
  };
  const int nodes = n + m + 2;
  const int src = 0, sink = n + m + 1;
  std::vector<std::vector<Arc>> adj(nodes);
  auto add = [&](int a, int b, double cap, double c) {
    adj[a].push_back({b, static_cast<int>(adj[b].size()), cap, c});
    adj[b].push_back({a, static_cast<int>(adj[a].size()) - 1, 0.0, -c});
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) add(src, 1 + i, mu(i), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) add(1 + i, 1 + n + j, kInf, cost(i, j));
  for (int j = 0; j < m; ++j) add(1 + n + j, sink, nu(j), 0.0);

  constexpr double kCapEps = 1e-15;
  const double target = std::min(mu.sum(), nu.sum());
  double sent = 0.0;
  const int max_rounds = 4 * (n + m) * (n + m) + 16;
  for (int round = 0; round < max_rounds && target - sent > 1e-14; ++round) {
    // Bellman-Ford: residual arcs carry negative costs.
    std::vector<double> dist(nodes, kInf);
    std::vector<int> prev_node(nodes, -1), prev_arc(nodes, -1);
    dist[src] = 0.0;
    for (int pass = 0; pass < nodes - 1; ++pass) {
      bool changed = false;
      for (int a = 0; a < nodes; ++a) {
        if (dist[a] == kInf) continue;
        for (int k = 0; k < static_cast<int>(adj[a].size()); ++k) {
          const Arc& e = adj[a][k];
          if (e.cap <= kCapEps) continue;
          const double nd = dist[a] + e.cost;
          if (nd < dist[e.to] - 1e-15) {
            dist[e.to] = nd;
            prev_node[e.to] = a;
            prev_arc[e.to] = k;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] == kInf) break;
    double push = target - sent;
    for (int v = sink; v != src; v = prev_node[v]) push = std::min(push, adj[prev_node[v]][prev_arc[v]].cap);
    for (int v = sink; v != src; v = prev_node[v]) {
      Arc& e = adj[prev_node[v]][prev_arc[v]];
      e.cap -= push;
      adj[v][e.rev].cap += push;
    }
    sent += push;
  }

  // Flow on a row->column arc is the capacity accumulated on its reverse arc.
  Eigen::MatrixXd plan = Eigen::MatrixXd::Zero(n, m);
  for (int i = 0; i < n; ++i)
    for (const Arc& e : adj[1 + i])
      if (e.to > n && e.to <= n + m) plan(i, e.to - 1 - n) = adj[e.to][e.rev].cap;
  return plan;
}

}  // namespace reactkd
