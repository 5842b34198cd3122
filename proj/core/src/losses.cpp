#include "reactkd/losses.hpp"

#include <cmath>

#include "json.hpp"
#include "reactkd/error.hpp"

namespace reactkd {

GradientArray GradientArray::from_vector(const Eigen::VectorXd& v) { return {{v.size()}, v}; }

GradientArray GradientArray::from_matrix(const Eigen::MatrixXd& m) {
  GradientArray g{{m.rows(), m.cols()}, Eigen::VectorXd(m.size())};
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) g.values(r * m.cols() + c) = m(r, c);
  return g;
}

Eigen::MatrixXd GradientArray::as_matrix() const {
  if (shape.size() == 1) return values;
  Eigen::MatrixXd m(shape[0], shape[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = values(r * m.cols() + c);
  return m;
}

void RgdWeights::validate() const {
  require(lambda_node >= 0.0 && lambda_edge >= 0.0 && lambda_gw >= 0.0, ErrorKind::kInvalidArgument,
          "RGD weights must be nonnegative");
  require(lambda_node + lambda_edge + lambda_gw > 0.0, ErrorKind::kUnusableConfig,
          "RGD weights are all zero");
}

void FocalConfig::validate(Eigen::Index classes) const {
  require(gamma >= 0.0, ErrorKind::kInvalidArgument, "focal gamma must be >= 0");
  require(alpha.empty() || static_cast<Eigen::Index>(alpha.size()) == classes,
          ErrorKind::kInvalidArgument, "focal alpha length does not match class count");
  for (double a : alpha) require(a >= 0.0, ErrorKind::kInvalidArgument, "focal alpha must be >= 0");
}

void TotalWeights::validate() const {
  require(lambda_focal >= 0.0 && lambda_logits >= 0.0 && lambda_rgd >= 0.0,
          ErrorKind::kInvalidArgument, "total-loss weights must be nonnegative");
  require(lambda_focal + lambda_logits + lambda_rgd > 0.0, ErrorKind::kUnusableConfig,
          "total-loss weights are all zero");
}

Eigen::VectorXd log_soft_predictions(const Eigen::VectorXd& z, double tau) {
  require(tau > 0.0, ErrorKind::kInvalidArgument, "temperature must be positive");
  require(z.size() > 0 && z.allFinite(), ErrorKind::kInvalidArgument, "logits must be finite");
  const Eigen::ArrayXd s = z.array() / tau;
  const double m = s.maxCoeff();
  const double lse = m + std::log((s - m).exp().sum());
  return (s - lse).matrix();
}

Eigen::VectorXd soft_predictions(const Eigen::VectorXd& z, double tau) {
  const Eigen::VectorXd lp = log_soft_predictions(z, tau);
  Eigen::VectorXd p = lp.array().exp().matrix();
  return p / p.sum();
}

LossReport kd_loss(const LogitsPair& pair) {
  require(pair.teacher.size() == pair.student.size(), ErrorKind::kInvalidArgument,
          "teacher and student logits differ in length");
  const Eigen::VectorXd lt = log_soft_predictions(pair.teacher, pair.temperature);
  const Eigen::VectorXd ls = log_soft_predictions(pair.student, pair.temperature);
  const Eigen::VectorXd pt = soft_predictions(pair.teacher, pair.temperature);
  const Eigen::VectorXd ps = soft_predictions(pair.student, pair.temperature);
  LossReport r;
  r.value = std::max(0.0, pt.dot(lt - ls));
  r.components["logits"] = r.value;
  r.gradients[kGradStudentLogits] = GradientArray::from_vector((ps - pt) / pair.temperature);
  return r;
}

namespace {

struct Normalized {
  Eigen::MatrixXd unit;    // N x C, rows of unit length
  Eigen::VectorXd norms;
};

Normalized normalize_rows(const Eigen::MatrixXd& f, const char* who) {
  require(f.rows() > 0 && f.cols() > 0 && f.allFinite(), ErrorKind::kInvalidArgument,
          std::string(who) + ": features must be a finite non-empty matrix");
  Normalized n{f, f.rowwise().norm()};
  for (Eigen::Index k = 0; k < f.rows(); ++k) {
    if (!(n.norms(k) > 0.0))
      fail(ErrorKind::kDegenerateInput, std::string(who) + ": zero-norm node feature");
    n.unit.row(k) /= n.norms(k);
  }
  return n;
}

// Pulls a gradient on unit rows back to the raw rows: (I - u u^T) g / |r|.
Eigen::MatrixXd through_normalization(const Normalized& n, const Eigen::MatrixXd& grad_unit) {
  Eigen::MatrixXd g = grad_unit;
  for (Eigen::Index k = 0; k < g.rows(); ++k) {
    const double along = n.unit.row(k).dot(grad_unit.row(k));
    g.row(k) = (grad_unit.row(k) - along * n.unit.row(k)) / n.norms(k);
  }
  return g;
}

Eigen::MatrixXd cosine(const Normalized& n) {
  Eigen::MatrixXd s = n.unit * n.unit.transpose();
  s.diagonal().setOnes();
  return s;
}

// Gradient through S = U U^T for a symmetric dL/dS.
Eigen::MatrixXd through_cosine(const Normalized& n, const Eigen::MatrixXd& grad_s) {
  return through_normalization(n, 2.0 * grad_s * n.unit);
}

void require_same_cardinality(Eigen::Index a, Eigen::Index b, const char* who) {
  if (a != b)
    fail(ErrorKind::kNotApplicable, std::string(who) + " needs equal node counts (" +
                                        std::to_string(a) + " vs " + std::to_string(b) + ")");
}

}  // namespace

LossReport node_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher) {
  require_same_cardinality(student.rows(), teacher.rows(), "node_loss");
  require(student.cols() == teacher.cols(), ErrorKind::kInvalidArgument,
          "node_loss: feature lengths differ");
  const Normalized s = normalize_rows(student, "node_loss");
  const Normalized t = normalize_rows(teacher, "node_loss");
  const auto n = static_cast<double>(student.rows());
  const Eigen::MatrixXd diff = s.unit - t.unit;
  LossReport r;
  r.value = diff.squaredNorm() / n;
  r.components["node"] = r.value;
  r.gradients[kGradStudentFeatures] = GradientArray::from_matrix(through_normalization(s, 2.0 / n * diff));
  return r;
}

LossReport node_loss(const RegionGraph& gs, const RegionGraph& gt) {
  return node_loss(gs.feature_matrix(), gt.feature_matrix());
}

LossReport edge_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher_edges) {
  require_same_cardinality(student.rows(), teacher_edges.rows(), "edge_loss");
  require(teacher_edges.rows() == teacher_edges.cols(), ErrorKind::kInvalidArgument,
          "edge_loss: teacher edges must be square");
  const Normalized s = normalize_rows(student, "edge_loss");
  const auto n = static_cast<double>(student.rows());
  const Eigen::MatrixXd diff = cosine(s) - teacher_edges;
  LossReport r;
  r.value = diff.squaredNorm() / (n * n);
  r.components["edge"] = r.value;
  r.gradients[kGradStudentFeatures] = GradientArray::from_matrix(through_cosine(s, 2.0 / (n * n) * diff));
  return r;
}

LossReport edge_loss(const RegionGraph& gs, const RegionGraph& gt) {
  return edge_loss(gs.feature_matrix(), gt.edges);
}

LossReport gw_fixed_plan_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher_edges,
                              const Eigen::MatrixXd& plan) {
  const Normalized s = normalize_rows(student, "gw_loss");
  const Eigen::MatrixXd ss = cosine(s);
  LossReport r;
  r.value = std::max(0.0, gw_objective(ss, teacher_edges, plan));
  r.components["gw"] = r.value;
  const Eigen::MatrixXd g = gw_source_gradient(ss, teacher_edges, plan);
  r.gradients[kGradStudentFeatures] = GradientArray::from_matrix(through_cosine(s, 0.5 * (g + g.transpose())));
  return r;
}

LossReport gw_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher_edges,
                   const GwConfig& cfg) {
  const Normalized s = normalize_rows(student, "gw_loss");
  const GwResult sol = gw_discrepancy(cosine(s), teacher_edges, cfg);
  LossReport r = gw_fixed_plan_loss(student, teacher_edges, sol.plan.matrix);
  r.value = sol.cost;
  r.components["gw"] = sol.cost;
  r.converged = sol.converged;
  return r;
}

LossReport rgd_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher_features,
                    const Eigen::MatrixXd& teacher_edges, const RgdWeights& w, const GwConfig& gw_cfg) {
  w.validate();
  const bool matched = student.rows() == teacher_features.rows();
  if (!matched && w.lambda_gw == 0.0)
    fail(ErrorKind::kUnusableConfig,
         "graphs differ in node count and lambda_gw is 0; no RGD term applies");
  LossReport r;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(student.rows(), student.cols());
  if (matched) {
    const LossReport node = node_loss(student, teacher_features);
    const LossReport edge = edge_loss(student, teacher_edges);
    r.components["node"] = node.value;
    r.components["edge"] = edge.value;
    grad += w.lambda_node * node.gradients.at(kGradStudentFeatures).as_matrix();
    grad += w.lambda_edge * edge.gradients.at(kGradStudentFeatures).as_matrix();
  } else {
    r.absent = {"node", "edge"};
  }
  const LossReport gw = gw_loss(student, teacher_edges, gw_cfg);
  r.components["gw"] = gw.value;
  r.converged = gw.converged;
  grad += w.lambda_gw * gw.gradients.at(kGradStudentFeatures).as_matrix();

  r.value = w.lambda_gw * r.components["gw"];
  if (matched) r.value += w.lambda_node * r.components["node"] + w.lambda_edge * r.components["edge"];
  r.gradients[kGradStudentFeatures] = GradientArray::from_matrix(grad);
  return r;
}

LossReport rgd_loss(const RegionGraph& gs, const RegionGraph& gt, const RgdWeights& w,
                    const GwConfig& gw_cfg) {
  return rgd_loss(gs.feature_matrix(), gt.feature_matrix(), gt.edges, w, gw_cfg);
}

LossReport focal_loss(const Eigen::VectorXd& logits, int label, const FocalConfig& cfg) {
  const Eigen::Index classes = logits.size();
  cfg.validate(classes);
  require(label >= 0 && label < classes, ErrorKind::kInvalidArgument, "focal label out of range");
  const Eigen::VectorXd logp = log_soft_predictions(logits, 1.0);
  const Eigen::VectorXd p = soft_predictions(logits, 1.0);
  const double alpha = cfg.alpha.empty() ? 1.0 : cfg.alpha[static_cast<std::size_t>(label)];
  const double log_q = logp(label);
  const double q = p(label);
  const double miss = p.sum() - q;  // 1 - p_y without cancellation
  const double weight = std::pow(miss, cfg.gamma);
  LossReport r;
  r.value = -alpha * weight * log_q;
  r.components["focal"] = r.value;
  double coeff = weight;
  if (cfg.gamma > 0.0 && miss > 0.0) coeff -= cfg.gamma * std::pow(miss, cfg.gamma - 1.0) * q * log_q;
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(classes);
  onehot(label) = 1.0;
  r.gradients[kGradStudentLogits] = GradientArray::from_vector(-alpha * coeff * (onehot - p));
  return r;
}

LossReport total_loss(const LossReport& focal, const LossReport& kd, const LossReport& rgd,
                      const TotalWeights& w) {
  w.validate();
  LossReport r;
  r.components["focal"] = focal.value;
  r.components["logits"] = kd.value;
  r.components["rgd"] = rgd.value;
  for (const auto& [name, v] : rgd.components) r.components["rgd." + name] = v;
  for (const auto& name : rgd.absent) r.absent.push_back("rgd." + name);
  r.value = w.lambda_focal * focal.value + w.lambda_logits * kd.value + w.lambda_rgd * rgd.value;
  r.converged = focal.converged && kd.converged && rgd.converged;

  const std::pair<const LossReport*, double> parts[] = {
      {&focal, w.lambda_focal}, {&kd, w.lambda_logits}, {&rgd, w.lambda_rgd}};
  for (const auto& [rep, weight] : parts) {
    for (const auto& [name, g] : rep->gradients) {
      auto it = r.gradients.find(name);
      if (it == r.gradients.end()) {
        r.gradients[name] = {g.shape, weight * g.values};
      } else {
        require(it->second.shape == g.shape, ErrorKind::kInvalidArgument,
                "incompatible gradient shapes for '" + name + "'");
        it->second.values += weight * g.values;
      }
    }
  }
  return r;
}

std::string loss_report_to_json(const LossReport& r) {
  nlohmann::ordered_json j;
  j["value"] = r.value;
  j["components"] = nlohmann::ordered_json::object();
  for (const auto& [name, v] : r.components) j["components"][name] = v;
  for (const auto& name : r.absent) j["components"][name] = nullptr;
  j["converged"] = r.converged;
  return j.dump(2) + "\n";
}

}  // namespace reactkd
