#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reactkd/losses.hpp"
#include "reactkd/metrics.hpp"
#include "reactkd/nets.hpp"
#include "reactkd/region_graph.hpp"
#include "reactkd/volume.hpp"

namespace reactkd {

// ---------------------------------------------------------------------------
// Synthetic cohort

struct SyntheticCase {
  Volume ct;   // HU
  Volume pet;  // uptake, arbitrary units
  MaskVolume mask;
  int grade = 0;  // 0 well, 1 moderate, 2 poor
};

// Generative rule, per case:
//   grade ~ uniform{0, 1, 2}
//   tumor count = grade + 1 with probability tumor_count_fidelity, otherwise
//   uniform{1, 2, 3}
//   liver: ellipsoid, 60 HU, uptake 1.0
//   tumor: sphere inside the liver, HU 60 - (20 + 25 grade), uptake
//   1.3 + 0.7 grade, both jittered per tumor
//   background: -100 HU, uptake 0.3; Gaussian noise everywhere
// The mask is passed through refine_mask before intensities are painted, so
// the emitted mask is a fixed point of it.
struct SynthConfig {
  Dims dims{16, 24, 24};
  Spacing spacing{2.0, 1.5, 1.5};
  double tumor_count_fidelity = 0.6;
  double ct_noise_hu = 8.0;
  double pet_noise = 0.05;  // relative

  void validate() const;
};

SyntheticCase synthesize_case(std::uint64_t seed, std::uint64_t index, const SynthConfig& cfg = {});
std::vector<SyntheticCase> synthesize_dataset(int n_cases, std::uint64_t seed, const SynthConfig& cfg = {});

// FNV-1a over the CT, PET and mask payload bytes and the grade.
std::uint64_t case_checksum(const SyntheticCase& c);

// ---------------------------------------------------------------------------
// Modality dropout

enum class Modality { kNone, kCt, kPet };
std::string to_string(Modality m);

struct DropoutConfig {
  double p_drop = 0.5;
  std::uint64_t seed = 0;
  bool allow_ct = true;
  bool allow_pet = true;

  void validate() const;
};

// With probability p_drop one eligible modality (uniform among the eligible
// ones) is chosen; never both.
Modality draw_dropout(const DropoutConfig& cfg, std::mt19937_64& rng);

struct DroppedCase {
  SyntheticCase data;
  Modality dropped = Modality::kNone;
};

// Zeroes the drawn modality. Intended for model inputs, i.e. after
// preprocessing, where zero is the channel mean.
DroppedCase modality_dropout(const SyntheticCase& c, const DropoutConfig& cfg, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Dose degradation

// kCounts applies the proxy at DegradeConfig::counts without a named preset.
enum class DegradeLevel { kNative, kMild, kSevere, kMixed, kCounts };
std::string to_string(DegradeLevel l);
DegradeLevel parse_degrade_level(const std::string& s);

inline constexpr double kMildCounts = 1e4;
inline constexpr double kSevereCounts = 5e4;

struct DegradeConfig {
  DegradeLevel level = DegradeLevel::kNative;
  double counts = 0.0;  // photons per ray; used by every level except native
  std::uint64_t seed = 0;

  static DegradeConfig preset(DegradeLevel level, std::uint64_t seed = 0);
  void validate() const;
};

struct DegradeResult {
  Volume volume;
  DegradeLevel applied = DegradeLevel::kNative;  // native or the noisy branch taken
  double counts = 0.0;                           // 0 when native
};

// Image-domain low-dose proxy. HU maps to a line integral
// a = 0.2 * max(HU + 1000, 0) / 1000, the detected count is
// Poisson(counts * exp(-a)) clamped below at 0.5, and the noisy integral is
// mapped back to HU. Native returns the input unchanged. Mixed flips a fair
// coin between native and the noisy branch.
DegradeResult degrade_ct(const Volume& v, const DegradeConfig& cfg, std::mt19937_64& rng);
// Per-case stream (seed, degrade, index).
DegradeResult degrade_ct(const Volume& v, const DegradeConfig& cfg, std::uint64_t index);

// ---------------------------------------------------------------------------
// Fixed encoders and region features

// 1x1x1 stem from the two input channels, one residual unit and optionally
// CBAM. Parameters are drawn once from a seed and never trained.
struct Encoder {
  Conv3d stem;
  ResUnitParams unit;
  CbamParams cbam;
  bool use_cbam = false;

  int channels() const { return stem.out_channels; }
};

Encoder make_encoder(int channels, bool use_cbam, std::uint64_t seed);
FeatureVolume encode(const Encoder& e, const FeatureVolume& input);

// CT and PET preprocessed with default settings, as a two-channel input.
FeatureVolume model_input(const SyntheticCase& c);
// Zeroes one channel of a model input.
FeatureVolume drop_channel(FeatureVolume input, Modality m);

// Region node features (N x C) for one case.
Eigen::MatrixXd pooled_features(const Encoder& e, const FeatureVolume& input, const MaskVolume& mask);

// Per-channel affine standardization fitted on training nodes.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static FeatureScaler fit(const std::vector<Eigen::MatrixXd>& features);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
};

// Head input built from node features R (N x C, liver first):
// [R_liver, mean of tumor rows (zero without tumors), tumor count - 2].
Eigen::VectorXd graph_stats(const Eigen::MatrixXd& nodes);
int graph_stats_size(int channels);
// Pulls a gradient on the stats back to the node features.
Eigen::MatrixXd graph_stats_backward(const Eigen::VectorXd& grad_stats, Eigen::Index nodes);

// ---------------------------------------------------------------------------
// Training

enum class Optimizer { kGradientDescent, kAdam };
std::string to_string(Optimizer o);
Optimizer parse_optimizer(const std::string& s);

struct TrainConfig {
  int teacher_epochs = 150;
  int student_epochs = 50;
  int teacher_batch = 2;
  int student_batch = 8;
  // Head-only training at desk scale needs larger steps than full encoders;
  // 2e-4 / 1e-4 remain available through the config.
  double teacher_lr = 2e-3;  // cosine-decayed over the teacher epochs
  double student_lr = 1e-2;  // constant
  double tau = 4.0;
  Optimizer optimizer = Optimizer::kAdam;
  TotalWeights weights;
  FocalConfig focal;
  RgdWeights rgd;
  GwConfig gw;
  std::uint64_t seed = 0;

  void validate() const;
};

// Cached per-case inputs for the head-only training stages.
struct CaseFeatures {
  int grade = 0;
  Eigen::MatrixXd teacher;                // standardized teacher node features
  Eigen::MatrixXd teacher_edges;          // cosine graph of `teacher`
  std::array<Eigen::MatrixXd, 3> student;  // standardized, indexed by Modality
};

struct HistoryRow {
  int epoch = 0;
  double total = 0.0;
  double focal = 0.0;
  double kd = 0.0;
  double rgd_node = 0.0;
  double rgd_edge = 0.0;
  double rgd_gw = 0.0;
  double dropped_modality_rate = 0.0;
};

// Row 0 evaluates the initial parameters on the full training set; row e >= 1
// holds the means over the steps of epoch e. Component columns are raw
// (unweighted) means.
struct TrainHistory {
  std::vector<HistoryRow> rows;
  std::vector<std::string> warnings;
};

std::string history_csv(const TrainHistory& h);
// Flags rises of the 5-epoch moving average of `total`.
std::vector<std::string> monotonicity_warnings(const TrainHistory& h, int window = 5);

struct TeacherModel {
  StudentHead head;  // stats of teacher node features -> logits
};

// Student node features are P * g for pooled student features g; the head
// reads the graph stats of those projected features.
struct StudentModel {
  Eigen::MatrixXd projector;  // teacher channels x student channels
  StudentHead head;
};

struct TeacherFit {
  TeacherModel model;
  TrainHistory history;
};

struct StudentFit {
  StudentModel model;
  TrainHistory history;
};

Eigen::VectorXd teacher_logits(const TeacherModel& t, const Eigen::MatrixXd& teacher_nodes);
Eigen::VectorXd student_logits(const StudentModel& s, const Eigen::MatrixXd& student_nodes);

TeacherModel init_teacher(int teacher_channels, std::uint64_t seed);
StudentModel init_student(int teacher_channels, int student_channels, std::uint64_t seed);

// Focal loss on the teacher head over the full-modality teacher features.
TeacherFit train_teacher_head(const std::vector<CaseFeatures>& data, const TrainConfig& cfg);
TeacherFit train_teacher_head(const std::vector<CaseFeatures>& data, const TrainConfig& cfg,
                              TeacherModel init);

// lambda_focal * focal + lambda_logits * KD + lambda_rgd * RGD on the student
// projector and head, with per-case modality dropout drawn from
// (drop.seed, dropout stream, epoch * cases + case).
StudentFit train_student(const std::vector<CaseFeatures>& data, const TeacherModel& teacher,
                         const TrainConfig& cfg, const DropoutConfig& drop);
StudentFit train_student(const std::vector<CaseFeatures>& data, const TeacherModel& teacher,
                         const TrainConfig& cfg, const DropoutConfig& drop, StudentModel init);

// Per-case loss of the student objective.
LossReport student_case_loss(const StudentModel& s, const CaseFeatures& c, Modality variant,
                             const Eigen::VectorXd& teacher_z, const TrainConfig& cfg);
// Its gradient, laid out like the model; `report` receives the loss when set.
StudentModel student_case_gradient(const StudentModel& s, const CaseFeatures& c, Modality variant,
                                   const Eigen::VectorXd& teacher_z, const TrainConfig& cfg,
                                   LossReport* report = nullptr);

ScoreSet predict(const StudentModel& s, const std::vector<CaseFeatures>& data, Modality variant);
ScoreSet predict(const TeacherModel& t, const std::vector<CaseFeatures>& data);

// ---------------------------------------------------------------------------
// End-to-end run on the synthetic cohort

struct DemoConfig {
  int n_cases = 200;
  double test_fraction = 0.3;
  int teacher_channels = 8;
  int student_channels = 4;
  SynthConfig synth;
  TrainConfig train;
  DropoutConfig drop;

  void validate() const;
};

struct Pipeline {
  Encoder teacher_encoder;
  Encoder student_encoder;
  FeatureScaler teacher_scaler;
  FeatureScaler student_scaler;
  TeacherModel teacher;
  StudentModel student;
  StudentModel baseline;  // the student before training
};

struct DemoResult {
  Pipeline pipeline;
  std::vector<SyntheticCase> test_cases;
  TrainHistory teacher_history;
  TrainHistory student_history;
  ScoreSet teacher_scores;
  ScoreSet student_scores;
  ScoreSet baseline_scores;
  MetricsSummary student_metrics;
  MetricsSummary baseline_metrics;
  double initial_kd = 0.0;
  double final_kd = 0.0;
};

DemoResult run_demo(const DemoConfig& cfg);

// Student scores on `cases` with CT replaced by degrade_ct(cfg, case index)
// and, when `ct_only`, PET zeroed.
ScoreSet evaluate_degraded(const Pipeline& p, const std::vector<SyntheticCase>& cases,
                           const DegradeConfig& cfg, bool ct_only);

}  // namespace reactkd
