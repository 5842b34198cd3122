#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reactkd/gromov_wasserstein.hpp"
#include "reactkd/region_graph.hpp"

namespace reactkd {

// Row-major array with an explicit shape.
struct GradientArray {
  std::vector<Eigen::Index> shape;
  Eigen::VectorXd values;

  static GradientArray from_vector(const Eigen::VectorXd& v);
  static GradientArray from_matrix(const Eigen::MatrixXd& m);
  Eigen::MatrixXd as_matrix() const;  // 1-D arrays become a single column
};

inline constexpr const char* kGradStudentLogits = "student_logits";
inline constexpr const char* kGradStudentFeatures = "student_features";

struct LossReport {
  double value = 0.0;
  std::map<std::string, double> components;
  std::vector<std::string> absent;  // components that did not apply
  std::map<std::string, GradientArray> gradients;
  bool converged = true;

  bool has_component(const std::string& name) const { return components.count(name) != 0; }
};

struct LogitsPair {
  Eigen::VectorXd teacher;
  Eigen::VectorXd student;
  double temperature = 4.0;
};

struct RgdWeights {
  double lambda_node = 1.0;
  double lambda_edge = 1.0;
  double lambda_gw = 2.0;

  void validate() const;
};

struct FocalConfig {
  std::vector<double> alpha{1.5, 1.0, 2.0};
  double gamma = 2.0;

  void validate(Eigen::Index classes) const;
};

struct TotalWeights {
  double lambda_focal = 1.0;
  double lambda_logits = 1.0;
  double lambda_rgd = 1.0;

  void validate() const;
};

// Temperature softmax with max subtraction.
Eigen::VectorXd soft_predictions(const Eigen::VectorXd& z, double tau);
Eigen::VectorXd log_soft_predictions(const Eigen::VectorXd& z, double tau);

// KL(softmax(teacher / tau) || softmax(student / tau)), gradient with respect
// to the student logits only; no tau^2 factor.
LossReport kd_loss(const LogitsPair& pair);

// Mean squared distance between L2-normalized node features. Throws
// kNotApplicable when the node counts differ.
LossReport node_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher);
LossReport node_loss(const RegionGraph& gs, const RegionGraph& gt);

// Mean squared difference of cosine-similarity matrices; the student side is
// recomputed from its features so the gradient flows to them.
LossReport edge_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher_edges);
LossReport edge_loss(const RegionGraph& gs, const RegionGraph& gt);

// Gromov-Wasserstein objective between the student cosine graph and the
// teacher edges at a fixed plan, with its gradient in the student features.
LossReport gw_fixed_plan_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher_edges,
                              const Eigen::MatrixXd& plan);

// Solves for the plan, then differentiates with the plan held fixed.
LossReport gw_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher_edges,
                   const GwConfig& cfg);

// lambda_node * node + lambda_edge * edge + lambda_gw * gw. With differing
// node counts the node and edge terms are listed in `absent` and only the GW
// term contributes; if lambda_gw is 0 as well, throws kUnusableConfig.
LossReport rgd_loss(const RegionGraph& gs, const RegionGraph& gt, const RgdWeights& w,
                    const GwConfig& gw_cfg = {});
LossReport rgd_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher_features,
                    const Eigen::MatrixXd& teacher_edges, const RgdWeights& w, const GwConfig& gw_cfg);

// -alpha_y (1 - p_y)^gamma log p_y with p = softmax(logits).
LossReport focal_loss(const Eigen::VectorXd& logits, int label, const FocalConfig& cfg = {});

// Weighted sum of the three reports; gradients sharing a name are summed with
// the same weights. Sub-components of the RGD report are kept as "rgd.<name>".
LossReport total_loss(const LossReport& focal, const LossReport& kd, const LossReport& rgd,
                      const TotalWeights& w);

// {"value", "components": {...}, "converged"}; absent components are null.
std::string loss_report_to_json(const LossReport& r);

}  // namespace reactkd
