#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reactkd {

inline constexpr int kNumClasses = 3;

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};

  std::int64_t total() const;
  std::int64_t trace() const;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // a zero denominator was replaced by 0
};

std::array<ClassMetrics, kNumClasses> per_class_prf1(const ConfusionMatrix& cm);

// trace / total. Throws kInvalidArgument on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct ScoreSet {
  std::vector<std::array<double, kNumClasses>> scores;
  std::vector<int> labels;

  void validate() const;
  std::size_t size() const { return labels.size(); }
  std::vector<int> predictions() const;  // argmax, lowest index on ties
};

// Mann-Whitney AUC (tied pairs count 1/2). Empty when either side is empty.
std::optional<double> auc_mann_whitney(std::span<const double> scores, std::span<const bool> positive);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// ROC vertices from (0,0) to (1,1), one per distinct score threshold.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const bool> positive);
double trapezoid_area(const std::vector<RocPoint>& roc);

struct AucResult {
  std::array<std::optional<double>, kNumClasses> per_class;
  double macro = 0.0;
};

// One-vs-rest per class; undefined classes are skipped by the macro mean.
// Throws kDegenerateInput when no class is defined.
AucResult auc_ovr(const ScoreSet& s);

struct DcaPoint {
  double threshold = 0.0;
  double net_benefit = 0.0;
  double treat_all = 0.0;
  double treat_none = 0.0;
};

// NB(t) = TP/n - FP/n * t/(1-t); a case is called positive when its score for
// `positive_class` is >= t.
std::vector<DcaPoint> dca_net_benefit(const ScoreSet& s, int positive_class,
                                      std::span<const double> thresholds);
// One-vs-rest curves averaged over the classes.
std::vector<DcaPoint> dca_macro(const ScoreSet& s, std::span<const double> thresholds);
std::vector<double> default_dca_thresholds();  // 0.01, 0.02, ..., 0.99

// Mean over defined entries; throws kDegenerateInput when none is defined.
double macro_average(std::span<const std::optional<double>> values);

struct MetricsSummary {
  ConfusionMatrix confusion;
  std::array<ClassMetrics, kNumClasses> per_class;
  AucResult auc;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

MetricsSummary summarize(const ScoreSet& s);

// Per-class rows plus a macro row.
std::string metrics_csv(const MetricsSummary& m);
std::string metrics_json(const MetricsSummary& m);

// CSV with header label,p0,p1,p2.
ScoreSet read_scores_csv(const std::string& path);
void write_scores_csv(const std::string& path, const ScoreSet& s);

}  // namespace reactkd
