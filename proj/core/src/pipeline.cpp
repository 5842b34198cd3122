#include <cmath>

#include "reactkd/distill.hpp"
#include "reactkd/error.hpp"
#include "reactkd/preprocess.hpp"
#include "reactkd/rng.hpp"

namespace reactkd {

Encoder make_encoder(int channels, bool use_cbam, std::uint64_t seed) {
  require(channels >= 2, ErrorKind::kInvalidArgument, "encoder needs at least two channels");
  Encoder e;
  e.stem = Conv3d::random(2, channels, 1, 1, derive_seed(seed, 0), 0.7);
  e.unit.conv1 = Conv3d::random(channels, channels, 3, 1, derive_seed(seed, 1), 0.15 / std::sqrt(channels));
  e.unit.conv2 = Conv3d::random(channels, channels, 3, 1, derive_seed(seed, 2), 0.15 / std::sqrt(channels));
  e.use_cbam = use_cbam;
  if (use_cbam) e.cbam = CbamParams::random(channels, 2, 7, derive_seed(seed, 3), 0.3);
  return e;
}

FeatureVolume encode(const Encoder& e, const FeatureVolume& input) {
  FeatureVolume f = resunit_forward(conv3d(input, e.stem), e.unit);
  if (e.use_cbam) f = cbam3d_forward(f, e.cbam);
  return f;
}

FeatureVolume model_input(const SyntheticCase& c) {
  const Volume ct = preprocess_ct(c.ct);
  const Volume pet = preprocess_pet(c.pet);
  return stack_channels({&ct, &pet});
}

FeatureVolume drop_channel(FeatureVolume input, Modality m) {
  require(input.channels == 2, ErrorKind::kInvalidArgument, "model input must have CT and PET channels");
  if (m == Modality::kNone) return input;
  const int c = m == Modality::kCt ? 0 : 1;
  const std::size_t n = input.dims.count();
  std::fill(input.data.begin() + static_cast<std::ptrdiff_t>(c * n),
            input.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * n), 0.0);
  return input;
}

Eigen::MatrixXd pooled_features(const Encoder& e, const FeatureVolume& input, const MaskVolume& mask) {
  return region_graph(encode(e, input), mask).feature_matrix();
}

FeatureScaler FeatureScaler::fit(const std::vector<Eigen::MatrixXd>& features) {
  require(!features.empty(), ErrorKind::kInvalidArgument, "no features to fit a scaler on");
  const Eigen::Index c = features.front().cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(c), sq = Eigen::VectorXd::Zero(c);
  double n = 0.0;
  for (const auto& f : features) {
    require(f.cols() == c, ErrorKind::kInvalidArgument, "feature widths differ");
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      sum += f.row(r).transpose();
      n += 1.0;
    }
  }
  FeatureScaler s;
  s.mean = sum / n;
  for (const auto& f : features)
    for (Eigen::Index r = 0; r < f.rows(); ++r) sq += (f.row(r).transpose() - s.mean).cwiseAbs2();
  s.scale = (sq / n).cwiseSqrt();
  for (Eigen::Index k = 0; k < c; ++k)
    if (s.scale(k) < 1e-12) s.scale(k) = 1.0;
  return s;
}

Eigen::MatrixXd FeatureScaler::apply(const Eigen::MatrixXd& features) const {
  require(features.cols() == mean.size(), ErrorKind::kInvalidArgument, "scaler width mismatch");
  return (features.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

int graph_stats_size(int channels) { return 2 * channels + 1; }

Eigen::VectorXd graph_stats(const Eigen::MatrixXd& nodes) {
  require(nodes.rows() >= 1, ErrorKind::kInvalidArgument, "graph stats need the liver node");
  const Eigen::Index c = nodes.cols(), tumors = nodes.rows() - 1;
  Eigen::VectorXd s(2 * c + 1);
  s.head(c) = nodes.row(0).transpose();
  s.segment(c, c).setZero();
  if (tumors > 0) s.segment(c, c) = nodes.bottomRows(tumors).colwise().mean().transpose();
  s(2 * c) = static_cast<double>(tumors) - 2.0;
  return s;
}

Eigen::MatrixXd graph_stats_backward(const Eigen::VectorXd& grad_stats, Eigen::Index nodes) {
  const Eigen::Index c = (grad_stats.size() - 1) / 2, tumors = nodes - 1;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nodes, c);
  g.row(0) = grad_stats.head(c).transpose();
  for (Eigen::Index r = 1; r < nodes; ++r)
    g.row(r) = grad_stats.segment(c, c).transpose() / static_cast<double>(tumors);
  return g;
}

void DemoConfig::validate() const {
  require(n_cases >= 2, ErrorKind::kInvalidArgument, "demo needs at least two cases");
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::kInvalidArgument,
          "test fraction must lie in (0, 1)");
  require(teacher_channels >= 2 && student_channels >= 2, ErrorKind::kInvalidArgument,
          "encoders need at least two channels");
  synth.validate();
  train.validate();
  drop.validate();
}

DemoResult run_demo(const DemoConfig& cfg) {
  cfg.validate();
  const std::uint64_t seed = cfg.train.seed;
  const int n_test = std::max(1, static_cast<int>(std::lround(cfg.n_cases * cfg.test_fraction)));
  const int n_train = cfg.n_cases - n_test;
  require(n_train >= 1, ErrorKind::kInvalidArgument, "demo split leaves no training cases");

  std::vector<SyntheticCase> cases = synthesize_dataset(cfg.n_cases, seed, cfg.synth);

  DemoResult r;
  Pipeline& p = r.pipeline;
  p.teacher_encoder = make_encoder(cfg.teacher_channels, true, derive_seed(seed, kStreamEncoder, 0));
  p.student_encoder = make_encoder(cfg.student_channels, false, derive_seed(seed, kStreamEncoder, 1));

  std::vector<Eigen::MatrixXd> teacher_raw(cases.size());
  std::vector<std::array<Eigen::MatrixXd, 3>> student_raw(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const FeatureVolume input = model_input(cases[i]);
    teacher_raw[i] = pooled_features(p.teacher_encoder, input, cases[i].mask);
    const bool train = static_cast<int>(i) < n_train;
    for (Modality m : {Modality::kNone, Modality::kCt, Modality::kPet}) {
      if (!train && m != Modality::kNone) continue;
      student_raw[i][static_cast<int>(m)] =
          pooled_features(p.student_encoder, drop_channel(input, m), cases[i].mask);
    }
  }
  p.teacher_scaler = FeatureScaler::fit({teacher_raw.begin(), teacher_raw.begin() + n_train});
  std::vector<Eigen::MatrixXd> student_full;
  for (int i = 0; i < n_train; ++i) student_full.push_back(student_raw[i][0]);
  p.student_scaler = FeatureScaler::fit(student_full);

  std::vector<CaseFeatures> train, test;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    CaseFeatures f;
    f.grade = cases[i].grade;
    f.teacher = p.teacher_scaler.apply(teacher_raw[i]);
    std::vector<Eigen::VectorXd> rows;
    for (Eigen::Index k = 0; k < f.teacher.rows(); ++k) rows.push_back(f.teacher.row(k).transpose());
    f.teacher_edges = build_graph(rows).edges;
    for (int m = 0; m < 3; ++m)
      if (student_raw[i][m].size() > 0) f.student[m] = p.student_scaler.apply(student_raw[i][m]);
    (static_cast<int>(i) < n_train ? train : test).push_back(std::move(f));
  }

  TeacherFit teacher = train_teacher_head(train, cfg.train);
  p.teacher = teacher.model;
  r.teacher_history = std::move(teacher.history);

  p.baseline = init_student(cfg.teacher_channels, cfg.student_channels, derive_seed(seed, kStreamInit, 1));
  StudentFit student = train_student(train, p.teacher, cfg.train, cfg.drop, p.baseline);
  p.student = student.model;
  r.student_history = std::move(student.history);

  r.teacher_scores = predict(p.teacher, test);
  r.student_scores = predict(p.student, test, Modality::kNone);
  r.baseline_scores = predict(p.baseline, test, Modality::kNone);
  r.student_metrics = summarize(r.student_scores);
  r.baseline_metrics = summarize(r.baseline_scores);
  r.initial_kd = r.student_history.rows.front().kd;
  r.final_kd = r.student_history.rows.back().kd;
  r.test_cases.assign(std::make_move_iterator(cases.begin() + n_train), std::make_move_iterator(cases.end()));
  return r;
}

ScoreSet evaluate_degraded(const Pipeline& p, const std::vector<SyntheticCase>& cases,
                           const DegradeConfig& cfg, bool ct_only) {
  ScoreSet s;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    SyntheticCase c = cases[i];
    c.ct = degrade_ct(c.ct, cfg, static_cast<std::uint64_t>(i)).volume;
    FeatureVolume input = model_input(c);
    if (ct_only) input = drop_channel(std::move(input), Modality::kPet);
    const Eigen::MatrixXd nodes = p.student_scaler.apply(pooled_features(p.student_encoder, input, c.mask));
    const Eigen::VectorXd prob = soft_predictions(student_logits(p.student, nodes), 1.0);
    s.scores.push_back({prob(0), prob(1), prob(2)});
    s.labels.push_back(c.grade);
  }
  return s;
}

}  // namespace reactkd
