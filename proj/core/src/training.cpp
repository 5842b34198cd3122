#include <cmath>
#include <numbers>
#include <sstream>

#include "reactkd/distill.hpp"
#include "reactkd/error.hpp"
#include "reactkd/rng.hpp"
#include "reactkd/text.hpp"

namespace reactkd {

std::string to_string(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "sgd"; }

Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return Optimizer::kAdam;
  if (s == "sgd") return Optimizer::kGradientDescent;
  fail(ErrorKind::kInvalidArgument, "unknown optimizer '" + s + "'");
}

void TrainConfig::validate() const {
  require(teacher_epochs >= 0 && student_epochs >= 0, ErrorKind::kInvalidArgument,
          "epoch counts must be nonnegative");
  require(teacher_batch > 0 && student_batch > 0, ErrorKind::kInvalidArgument, "batch sizes must be positive");
  require(std::isfinite(teacher_lr) && std::isfinite(student_lr) && teacher_lr >= 0.0 && student_lr >= 0.0,
          ErrorKind::kInvalidArgument, "learning rates must be finite and nonnegative");
  require(tau > 0.0, ErrorKind::kInvalidArgument, "temperature must be positive");
  weights.validate();
  focal.validate(kNumClasses);
  rgd.validate();
  gw.validate();
}

std::string history_csv(const TrainHistory& h) {
  std::ostringstream out;
  out << "epoch,total,focal,kd,rgd_node,rgd_edge,rgd_gw,dropped_modality_rate\n";
  for (const auto& r : h.rows)
    out << r.epoch << ',' << format_double(r.total) << ',' << format_double(r.focal) << ','
        << format_double(r.kd) << ',' << format_double(r.rgd_node) << ',' << format_double(r.rgd_edge) << ','
        << format_double(r.rgd_gw) << ',' << format_double(r.dropped_modality_rate) << '\n';
  return out.str();
}

std::vector<std::string> monotonicity_warnings(const TrainHistory& h, int window) {
  std::vector<std::string> out;
  std::vector<double> avg;
  for (std::size_t i = 0; i + static_cast<std::size_t>(window) <= h.rows.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < window; ++k) s += h.rows[i + static_cast<std::size_t>(k)].total;
    avg.push_back(s / window);
  }
  for (std::size_t i = 1; i < avg.size(); ++i)
    if (avg[i] > avg[i - 1] * (1.0 + 1e-12) + 1e-15)
      out.push_back("moving average of total rose at epoch " + std::to_string(h.rows[i + window - 1].epoch) +
                    " (" + format_double(avg[i - 1]) + " -> " + format_double(avg[i]) + ")");
  return out;
}

Eigen::VectorXd teacher_logits(const TeacherModel& t, const Eigen::MatrixXd& teacher_nodes) {
  return student_head_forward(graph_stats(teacher_nodes), t.head);
}

Eigen::VectorXd student_logits(const StudentModel& s, const Eigen::MatrixXd& student_nodes) {
  require(student_nodes.cols() == s.projector.cols(), ErrorKind::kInvalidArgument,
          "student features do not match the projector");
  return student_head_forward(graph_stats(student_nodes * s.projector.transpose()), s.head);
}

TeacherModel init_teacher(int teacher_channels, std::uint64_t seed) {
  return {StudentHead::init(graph_stats_size(teacher_channels), kNumClasses, seed, 0.01)};
}

StudentModel init_student(int teacher_channels, int student_channels, std::uint64_t seed) {
  StudentModel s;
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(student_channels));
  s.projector.resize(teacher_channels, student_channels);
  for (Eigen::Index i = 0; i < s.projector.size(); ++i) s.projector.data()[i] = n(rng);
  s.head = StudentHead::init(graph_stats_size(teacher_channels), kNumClasses, derive_seed(seed, 1), 0.01);
  return s;
}

namespace {

// Parameters flattened into one vector so both optimizers share one code path.
class Stepper {
 public:
  Stepper(Optimizer kind, Eigen::Index size)
      : kind_(kind), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
    if (kind_ == Optimizer::kGradientDescent) {
      theta -= lr * grad;
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    m_ = b1 * m_ + (1.0 - b1) * grad;
    v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
    theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
  }

 private:
  Optimizer kind_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

Eigen::VectorXd pack(const StudentHead& h) {
  Eigen::VectorXd v(h.weight.size() + h.bias.size());
  v << Eigen::Map<const Eigen::VectorXd>(h.weight.data(), h.weight.size()), h.bias;
  return v;
}

void unpack(const Eigen::VectorXd& v, StudentHead& h, Eigen::Index offset = 0) {
  h.weight = Eigen::Map<const Eigen::MatrixXd>(v.data() + offset, h.weight.rows(), h.weight.cols());
  h.bias = v.segment(offset + h.weight.size(), h.bias.size());
}

Eigen::VectorXd pack(const StudentModel& s) {
  Eigen::VectorXd v(s.projector.size() + s.head.weight.size() + s.head.bias.size());
  v << Eigen::Map<const Eigen::VectorXd>(s.projector.data(), s.projector.size()), pack(s.head);
  return v;
}

void unpack(const Eigen::VectorXd& v, StudentModel& s) {
  s.projector = Eigen::Map<const Eigen::MatrixXd>(v.data(), s.projector.rows(), s.projector.cols());
  unpack(v, s.head, s.projector.size());
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto rng = make_rng(seed, kStreamShuffle, epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

void check_finite(double value, const char* stage, int epoch) {
  if (!std::isfinite(value))
    fail(ErrorKind::kDivergence, std::string(stage) + " loss is not finite at epoch " + std::to_string(epoch));
}

void check_params(const Eigen::VectorXd& theta, const char* stage, int epoch) {
  if (!theta.allFinite())
    fail(ErrorKind::kDivergence, std::string(stage) + " parameters are not finite at epoch " + std::to_string(epoch));
}

}  // namespace

TeacherFit train_teacher_head(const std::vector<CaseFeatures>& data, const TrainConfig& cfg) {
  require(!data.empty(), ErrorKind::kInvalidArgument, "teacher training needs data");
  return train_teacher_head(data, cfg,
                            init_teacher(static_cast<int>(data.front().teacher.cols()),
                                         derive_seed(cfg.seed, kStreamInit, 0)));
}

TeacherFit train_teacher_head(const std::vector<CaseFeatures>& data, const TrainConfig& cfg, TeacherModel init) {
  cfg.validate();
  require(!data.empty(), ErrorKind::kInvalidArgument, "teacher training needs data");
  std::vector<Eigen::VectorXd> stats;
  for (const auto& c : data) stats.push_back(graph_stats(c.teacher));

  TeacherFit fit{std::move(init), {}};
  StudentHead& head = fit.model.head;
  const auto n = static_cast<double>(data.size());

  double initial = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    initial += focal_loss(student_head_forward(stats[i], head), data[i].grade, cfg.focal).value;
  initial /= n;
  check_finite(initial, "teacher", 0);
  fit.history.rows.push_back({0, initial, initial, 0, 0, 0, 0, 0});

  Eigen::VectorXd theta = pack(head);
  Stepper opt(cfg.optimizer, theta.size());
  for (int epoch = 1; epoch <= cfg.teacher_epochs; ++epoch) {
    const double lr = cfg.teacher_lr * 0.5 *
                      (1.0 + std::cos(std::numbers::pi * (epoch - 1) / cfg.teacher_epochs));
    const auto order = shuffled(data.size(), cfg.seed, static_cast<std::uint64_t>(epoch));
    double sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.teacher_batch)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.teacher_batch));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
      for (std::size_t k = b; k < end; ++k) {
        const std::size_t i = order[k];
        const Eigen::VectorXd z = student_head_forward(stats[i], head);
        require(z.allFinite(), ErrorKind::kDivergence, "teacher logits are not finite at epoch " + std::to_string(epoch));
        const LossReport f = focal_loss(z, data[i].grade, cfg.focal);
        sum += f.value;
        const HeadGradient g = student_head_backward(stats[i], f.gradients.at(kGradStudentLogits).values);
        StudentHead gh{g.weight, g.bias};
        grad += pack(gh);
      }
      opt.step(theta, grad / static_cast<double>(end - b), lr);
      check_params(theta, "teacher", epoch);
      unpack(theta, head);
    }
    const double mean = sum / n;
    check_finite(mean, "teacher", epoch);
    fit.history.rows.push_back({epoch, mean, mean, 0, 0, 0, 0, 0});
  }
  fit.history.warnings = monotonicity_warnings(fit.history);
  return fit;
}

LossReport student_case_loss(const StudentModel& s, const CaseFeatures& c, Modality variant,
                             const Eigen::VectorXd& teacher_z, const TrainConfig& cfg) {
  const Eigen::MatrixXd& g = c.student[static_cast<int>(variant)];
  require(g.size() > 0, ErrorKind::kInvalidArgument, "missing student features for " + to_string(variant));
  const Eigen::MatrixXd nodes = g * s.projector.transpose();
  const Eigen::VectorXd z = student_head_forward(graph_stats(nodes), s.head);
  require(nodes.allFinite() && z.allFinite(), ErrorKind::kDivergence, "student forward pass is not finite");
  const LossReport focal = focal_loss(z, c.grade, cfg.focal);
  const LossReport kd = kd_loss({teacher_z, z, cfg.tau});
  const LossReport rgd = rgd_loss(nodes, c.teacher, c.teacher_edges, cfg.rgd, cfg.gw);
  return total_loss(focal, kd, rgd, cfg.weights);
}

StudentModel student_case_gradient(const StudentModel& s, const CaseFeatures& c, Modality variant,
                                   const Eigen::VectorXd& teacher_z, const TrainConfig& cfg, LossReport* report) {
  LossReport r = student_case_loss(s, c, variant, teacher_z, cfg);
  const Eigen::MatrixXd& g = c.student[static_cast<int>(variant)];
  const Eigen::MatrixXd nodes = g * s.projector.transpose();
  const Eigen::VectorXd gz = r.gradients.at(kGradStudentLogits).values;

  const HeadGradient hg = student_head_backward(graph_stats(nodes), gz);
  Eigen::MatrixXd g_nodes = graph_stats_backward(student_head_input_gradient(s.head, gz), nodes.rows());
  if (auto it = r.gradients.find(kGradStudentFeatures); it != r.gradients.end())
    g_nodes += it->second.as_matrix();

  StudentModel grad;
  grad.projector = g_nodes.transpose() * g;
  grad.head = {hg.weight, hg.bias};
  if (report) *report = std::move(r);
  return grad;
}

namespace {

struct CaseStep {
  LossReport report;
  Eigen::VectorXd grad;  // packed like the model
};

CaseStep student_step(const StudentModel& s, const CaseFeatures& c, Modality variant,
                      const Eigen::VectorXd& teacher_z, const TrainConfig& cfg) {
  CaseStep out;
  out.grad = pack(student_case_gradient(s, c, variant, teacher_z, cfg, &out.report));
  return out;
}

HistoryRow row_from(const LossReport& r) {
  auto get = [&](const char* k) {
    auto it = r.components.find(k);
    return it == r.components.end() ? 0.0 : it->second;
  };
  return {0, r.value, get("focal"), get("logits"), get("rgd.node"), get("rgd.edge"), get("rgd.gw"), 0.0};
}

void accumulate(HistoryRow& acc, const HistoryRow& r) {
  acc.total += r.total;
  acc.focal += r.focal;
  acc.kd += r.kd;
  acc.rgd_node += r.rgd_node;
  acc.rgd_edge += r.rgd_edge;
  acc.rgd_gw += r.rgd_gw;
}

void scale(HistoryRow& acc, double n) {
  acc.total /= n;
  acc.focal /= n;
  acc.kd /= n;
  acc.rgd_node /= n;
  acc.rgd_edge /= n;
  acc.rgd_gw /= n;
}

}  // namespace

StudentFit train_student(const std::vector<CaseFeatures>& data, const TeacherModel& teacher,
                         const TrainConfig& cfg, const DropoutConfig& drop) {
  require(!data.empty(), ErrorKind::kInvalidArgument, "student training needs data");
  return train_student(data, teacher, cfg, drop,
                       init_student(static_cast<int>(data.front().teacher.cols()),
                                    static_cast<int>(data.front().student[0].cols()),
                                    derive_seed(cfg.seed, kStreamInit, 1)));
}

StudentFit train_student(const std::vector<CaseFeatures>& data, const TeacherModel& teacher,
                         const TrainConfig& cfg, const DropoutConfig& drop, StudentModel init) {
  cfg.validate();
  drop.validate();
  require(!data.empty(), ErrorKind::kInvalidArgument, "student training needs data");
  std::vector<Eigen::VectorXd> teacher_z;
  for (const auto& c : data) teacher_z.push_back(teacher_logits(teacher, c.teacher));

  StudentFit fit{std::move(init), {}};
  StudentModel& model = fit.model;
  const auto n = static_cast<double>(data.size());

  HistoryRow first;
  for (std::size_t i = 0; i < data.size(); ++i)
    accumulate(first, row_from(student_case_loss(model, data[i], Modality::kNone, teacher_z[i], cfg)));
  scale(first, n);
  check_finite(first.total, "student", 0);
  fit.history.rows.push_back(first);

  Eigen::VectorXd theta = pack(model);
  Stepper opt(cfg.optimizer, theta.size());
  for (int epoch = 1; epoch <= cfg.student_epochs; ++epoch) {
    const auto order = shuffled(data.size(), cfg.seed ^ 0x5157ULL, static_cast<std::uint64_t>(epoch));
    HistoryRow row;
    row.epoch = epoch;
    int dropped = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.student_batch)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.student_batch));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
      for (std::size_t k = b; k < end; ++k) {
        const std::size_t i = order[k];
        auto rng = make_rng(drop.seed, kStreamDropout, static_cast<std::uint64_t>(epoch) * data.size() + i);
        const Modality variant = draw_dropout(drop, rng);
        if (variant != Modality::kNone) ++dropped;
        const CaseStep step = student_step(model, data[i], variant, teacher_z[i], cfg);
        accumulate(row, row_from(step.report));
        grad += step.grad;
      }
      opt.step(theta, grad / static_cast<double>(end - b), cfg.student_lr);
      check_params(theta, "student", epoch);
      unpack(theta, model);
    }
    scale(row, n);
    row.dropped_modality_rate = dropped / n;
    check_finite(row.total, "student", epoch);
    fit.history.rows.push_back(row);
  }
  fit.history.warnings = monotonicity_warnings(fit.history);
  return fit;
}

ScoreSet predict(const StudentModel& s, const std::vector<CaseFeatures>& data, Modality variant) {
  ScoreSet out;
  for (const auto& c : data) {
    const Eigen::VectorXd p = soft_predictions(student_logits(s, c.student[static_cast<int>(variant)]), 1.0);
    out.scores.push_back({p(0), p(1), p(2)});
    out.labels.push_back(c.grade);
  }
  return out;
}

ScoreSet predict(const TeacherModel& t, const std::vector<CaseFeatures>& data) {
  ScoreSet out;
  for (const auto& c : data) {
    const Eigen::VectorXd p = soft_predictions(teacher_logits(t, c.teacher), 1.0);
    out.scores.push_back({p(0), p(1), p(2)});
    out.labels.push_back(c.grade);
  }
  return out;
}

}  // namespace reactkd
