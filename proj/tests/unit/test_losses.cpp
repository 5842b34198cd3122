#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "reactkd/error.hpp"
#include "reactkd/losses.hpp"
#include "suites.hpp"

using namespace reactkd;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kFormat;
}

}  // namespace

TEST_CASE("soft predictions") {
  const Eigen::VectorXd u = soft_predictions(Eigen::Vector3d::Zero(), 1.0);
  for (int i = 0; i < 3; ++i) CHECK(u(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Eigen::VectorXd p = soft_predictions(Eigen::Vector2d(std::log(2.0), 0.0), 1.0);
  CHECK(p(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(p(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Eigen::VectorXd hot = soft_predictions(Eigen::Vector2d(5.0, -5.0), 1000.0);
  CHECK(hot(0) == doctest::Approx(1.0 / (1.0 + std::exp(-0.01))).epsilon(1e-14));
  CHECK(std::abs(hot(0) - 0.5) < 3e-3);
  const Eigen::VectorXd big = soft_predictions(Eigen::Vector3d(1e4, 0.0, -1e4), 1.0);
  CHECK(std::abs(big.sum() - 1.0) <= 1e-12);
  CHECK_THROWS_AS(soft_predictions(u, 0.0), Error);
}

TEST_CASE("closed-form loss values") {
  const LossReport kd = kd_loss({Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), 1.0});
  const double e = std::exp(1.0);
  CHECK(std::abs(kd.value - (e - 1) / (e + 1)) <= 1e-9);

  const LossReport focal = focal_loss(Eigen::Vector2d(0, 0), 0, FocalConfig{{1.0, 1.0}, 2.0});
  CHECK(std::abs(focal.value - 0.25 * std::log(2.0)) <= 1e-12);

  Eigen::MatrixXd ss(2, 2), st = Eigen::MatrixXd::Ones(2, 2);
  ss << 1, 0, 0, 1;
  CHECK(edge_loss(ss, st).value == 0.5);

  Eigen::MatrixXd e1(1, 2), e2(1, 2);
  e1 << 1, 0;
  e2 << 0, 1;
  CHECK(node_loss(e1, e2).value == 2.0);
}

TEST_CASE("kd properties") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd a = oracle::random_matrix(3, 1, rng, 3.0).col(0);
    const Eigen::VectorXd b = oracle::random_matrix(3, 1, rng, 3.0).col(0);
    CHECK(kd_loss({a, b, 4.0}).value >= 0.0);
    const LossReport self = kd_loss({a, a, 4.0});
    CHECK(self.value == doctest::Approx(0.0));
    CHECK(suite::grad_of(self, kGradStudentLogits).cwiseAbs().maxCoeff() <= 1e-15);
    // Shifting all logits leaves the softened distribution unchanged.
    CHECK(std::abs(kd_loss({a, a.array() + 3.0, 2.0}).value) <= 1e-12);
  }
}

TEST_CASE("focal reduces to cross-entropy and vanishes when confident") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd z = oracle::random_matrix(3, 1, rng, 2.0).col(0);
    const int y = t % 3;
    const double ce = -(z(y) - std::log(z.array().exp().sum()));
    CHECK(std::abs(focal_loss(z, y, {{1, 1, 1}, 0.0}).value - ce) <= 1e-12);
  }
  CHECK(focal_loss(Eigen::Vector3d(800, 0, 0), 0).value == 0.0);
  CHECK(std::isfinite(focal_loss(Eigen::Vector3d(-800, 0, 0), 0).value));
  CHECK_THROWS_AS(focal_loss(Eigen::Vector3d::Zero(), 3), Error);
}

TEST_CASE("gradients match central differences") {
  const auto worst = suite::gradient_suite(40, 1234);
  for (const auto& [name, err] : worst) {
    INFO(name);
    CHECK(err <= 1e-5);
  }
}

TEST_CASE("gw fixed-plan gradient matches central differences") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    const int n = 1 + t % 4, m = 1 + (t / 4) % 4, c = 3;
    const Eigen::MatrixXd s = oracle::random_matrix(n, c, rng), te = oracle::cosine_matrix(oracle::random_matrix(m, c, rng));
    Eigen::MatrixXd plan = oracle::random_matrix(n, m, rng).cwiseAbs();
    plan /= plan.sum();
    const auto f = [&](const Eigen::VectorXd& x) { return gw_fixed_plan_loss(oracle::unflatten(x, n, c), te, plan).value; };
    const LossReport r = gw_fixed_plan_loss(s, te, plan);
    CHECK(oracle::gradient_error(oracle::flatten(suite::grad_of(r, kGradStudentFeatures)),
                                 oracle::central_difference(f, oracle::flatten(s))) <= 1e-5);
  }
}

TEST_CASE("node and edge losses are permutation invariant and bounded") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const int n = 1 + t % 5;
    const Eigen::MatrixXd s = oracle::random_matrix(n, 4, rng), tf = oracle::random_matrix(n, 4, rng);
    const Eigen::MatrixXd te = oracle::cosine_matrix(tf);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Eigen::MatrixXd P = oracle::permutation(perm);
    const double node = node_loss(s, tf).value, edge = edge_loss(s, te).value;
    CHECK(std::abs(node - node_loss(P * s, P * tf).value) <= 1e-12);
    CHECK(std::abs(edge - edge_loss(P * s, P * te * P.transpose()).value) <= 1e-12);
    CHECK(node >= 0.0);
    CHECK(node <= 4.0);
    CHECK(edge <= 4.0);
    CHECK(node_loss(s, s).value <= 1e-15);
    CHECK(edge_loss(s, oracle::cosine_matrix(s)).value <= 1e-15);
  }
  CHECK(kind_of([] { node_loss(Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(3, 3)); }) ==
        ErrorKind::kNotApplicable);
  CHECK(kind_of([] { edge_loss(Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(3, 3)); }) ==
        ErrorKind::kNotApplicable);
  CHECK(kind_of([] { node_loss(Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Ones(1, 3)); }) ==
        ErrorKind::kDegenerateInput);
}

TEST_CASE("rgd weighting and fallback") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd s = oracle::random_matrix(3, 4, rng), tf = oracle::random_matrix(3, 4, rng);
  const Eigen::MatrixXd te = oracle::cosine_matrix(tf);
  const GwConfig gw;

  const LossReport only_node = rgd_loss(s, tf, te, {1, 0, 0}, gw);
  CHECK(only_node.value == node_loss(s, tf).value);

  const LossReport full = rgd_loss(s, tf, te, {0.7, 1.3, 2.0}, gw);
  const double recomputed = 0.7 * full.components.at("node") + 1.3 * full.components.at("edge") +
                            2.0 * full.components.at("gw");
  CHECK(std::abs(full.value - recomputed) <= 1e-12);
  const LossReport scaled = rgd_loss(s, tf, te, {2.1, 3.9, 6.0}, gw);
  CHECK(std::abs(scaled.value - 3.0 * full.value) <= 1e-12 * std::max(1.0, full.value));

  CHECK(rgd_loss(s, s, oracle::cosine_matrix(s), {0.5, 1.5, 2.0}, gw).value <= 1e-6);

  const Eigen::MatrixXd t2 = oracle::random_matrix(2, 4, rng);
  const LossReport fallback = rgd_loss(s, t2, oracle::cosine_matrix(t2), {1, 1, 2}, gw);
  CHECK(fallback.absent == std::vector<std::string>{"node", "edge"});
  CHECK_FALSE(fallback.has_component("node"));
  CHECK(fallback.value == 2.0 * fallback.components.at("gw"));
  CHECK(kind_of([&] { rgd_loss(s, t2, oracle::cosine_matrix(t2), {1, 1, 0}, gw); }) == ErrorKind::kUnusableConfig);
}

TEST_CASE("total loss weighting") {
  std::mt19937_64 rng(6);
  const auto g = suite::random_instance(rng);
  const LossReport f = focal_loss(g.z_student, g.label, g.focal);
  const LossReport k = kd_loss({g.z_teacher, g.z_student, g.tau});
  const LossReport r = rgd_loss(g.student, g.teacher, g.teacher_edges, g.rgd, {});

  const LossReport only_focal = total_loss(f, k, r, {1, 0, 0});
  CHECK(only_focal.value == f.value);
  CHECK(suite::grad_of(only_focal, kGradStudentLogits) == suite::grad_of(f, kGradStudentLogits));

  const TotalWeights w{0.3, 1.7, 0.9};
  const LossReport t = total_loss(f, k, r, w);
  const double recomputed = w.lambda_focal * t.components.at("focal") + w.lambda_logits * t.components.at("logits") +
                            w.lambda_rgd * t.components.at("rgd");
  CHECK(std::abs(t.value - recomputed) <= 1e-12);
  const LossReport t2 = total_loss(f, k, r, {0.6, 3.4, 1.8});
  CHECK(std::abs(t2.value - 2.0 * t.value) <= 1e-12 * std::max(1.0, t.value));

  LossReport zero;
  CHECK(total_loss(zero, zero, zero, w).value == 0.0);
  CHECK_THROWS_AS(total_loss(f, k, r, {0, 0, 0}), Error);

  LossReport wrong = k;
  wrong.gradients[kGradStudentLogits] = GradientArray::from_vector(Eigen::VectorXd::Zero(4));
  CHECK_THROWS_AS(total_loss(f, wrong, r, w), Error);
}

TEST_CASE("loss report JSON marks absent components null") {
  LossReport r;
  r.value = 1.5;
  r.components["gw"] = 1.5;
  r.absent = {"node"};
  const std::string j = loss_report_to_json(r);
  CHECK(j.find("\"node\": null") != std::string::npos);
  CHECK(j.find("\"converged\": true") != std::string::npos);
}
