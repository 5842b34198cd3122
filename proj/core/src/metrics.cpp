#include "reactkd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "reactkd/error.hpp"
#include "reactkd/text.hpp"

namespace reactkd {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int i = 0; i < kNumClasses; ++i) t += counts[i][i];
  return t;
}

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions) {
  require(labels.size() == predictions.size(), ErrorKind::kInvalidArgument,
          "labels and predictions differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < kNumClasses && predictions[i] >= 0 &&
                predictions[i] < kNumClasses,
            ErrorKind::kInvalidArgument, "class index out of range");
    ++cm.counts[labels[i]][predictions[i]];
  }
  return cm;
}

std::array<ClassMetrics, kNumClasses> per_class_prf1(const ConfusionMatrix& cm) {
  std::array<ClassMetrics, kNumClasses> out{};
  for (int c = 0; c < kNumClasses; ++c) {
    std::int64_t tp = cm.counts[c][c], fp = 0, fn = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      if (k == c) continue;
      fp += cm.counts[k][c];
      fn += cm.counts[c][k];
    }
    ClassMetrics& m = out[c];
    if (tp + fp > 0) {
      m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    } else {
      m.degenerate = true;
    }
    if (tp + fn > 0) {
      m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    } else {
      m.degenerate = true;
    }
    if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return out;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  require(total > 0, ErrorKind::kInvalidArgument, "accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

void ScoreSet::validate() const {
  require(scores.size() == labels.size(), ErrorKind::kInvalidArgument,
          "score rows and labels differ in count");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < kNumClasses, ErrorKind::kInvalidArgument,
            "label out of range at row " + std::to_string(i));
    double sum = 0.0;
    for (double v : scores[i]) {
      require(std::isfinite(v) && v >= 0.0, ErrorKind::kInvalidArgument,
              "scores must be finite and nonnegative at row " + std::to_string(i));
      sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::kInvalidArgument,
            "score row " + std::to_string(i) + " does not sum to 1");
  }
}

std::vector<int> ScoreSet::predictions() const {
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = static_cast<int>(std::max_element(scores[i].begin(), scores[i].end()) - scores[i].begin());
  return out;
}

std::optional<double> auc_mann_whitney(std::span<const double> scores, std::span<const bool> positive) {
  require(scores.size() == positive.size(), ErrorKind::kInvalidArgument, "score/label length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks: tied scores share the mean of their ranks.
  double rank_sum = 0.0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) {
        rank_sum += midrank;
        ++npos;
      }
    i = j;
  }
  const std::size_t nneg = n - npos;
  if (npos == 0 || nneg == 0) return std::nullopt;
  const double p = static_cast<double>(npos), q = static_cast<double>(nneg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const bool> positive) {
  require(scores.size() == positive.size(), ErrorKind::kInvalidArgument, "score/label length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto npos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  const double nneg = static_cast<double>(n) - npos;
  std::vector<RocPoint> roc{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? tp : fp) += 1.0;
      ++j;
    }
    roc.push_back({nneg > 0 ? fp / nneg : 0.0, npos > 0 ? tp / npos : 0.0});
    i = j;
  }
  return roc;
}

double trapezoid_area(const std::vector<RocPoint>& roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  return area;
}

namespace {

void one_vs_rest(const ScoreSet& s, int c, std::vector<double>& score, std::vector<char>& pos) {
  score.resize(s.size());
  pos.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    score[i] = s.scores[i][c];
    pos[i] = s.labels[i] == c;
  }
}

std::span<const bool> as_bools(const std::vector<char>& v) {
  static_assert(sizeof(char) == sizeof(bool));
  return {reinterpret_cast<const bool*>(v.data()), v.size()};
}

}  // namespace

AucResult auc_ovr(const ScoreSet& s) {
  s.validate();
  AucResult r;
  std::vector<double> score;
  std::vector<char> pos;
  for (int c = 0; c < kNumClasses; ++c) {
    one_vs_rest(s, c, score, pos);
    r.per_class[c] = auc_mann_whitney(score, as_bools(pos));
  }
  r.macro = macro_average(r.per_class);
  return r;
}

double macro_average(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) fail(ErrorKind::kDegenerateInput, "macro average over no defined values");
  return sum / n;
}

std::vector<DcaPoint> dca_net_benefit(const ScoreSet& s, int positive_class,
                                      std::span<const double> thresholds) {
  s.validate();
  require(positive_class >= 0 && positive_class < kNumClasses, ErrorKind::kInvalidArgument,
          "positive class out of range");
  require(s.size() > 0, ErrorKind::kInvalidArgument, "decision curve of an empty score set");
  const auto n = static_cast<double>(s.size());
  double prevalence = 0.0;
  for (int l : s.labels) prevalence += l == positive_class ? 1.0 : 0.0;
  prevalence /= n;
  std::vector<DcaPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    require(t > 0.0 && t < 1.0, ErrorKind::kInvalidArgument, "DCA thresholds must lie in (0, 1)");
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.scores[i][positive_class] < t) continue;
      (s.labels[i] == positive_class ? tp : fp) += 1.0;
    }
    const double odds = t / (1.0 - t);
    out.push_back({t, tp / n - fp / n * odds, prevalence - (1.0 - prevalence) * odds, 0.0});
  }
  return out;
}

std::vector<DcaPoint> dca_macro(const ScoreSet& s, std::span<const double> thresholds) {
  std::vector<DcaPoint> acc;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto curve = dca_net_benefit(s, c, thresholds);
    if (acc.empty()) {
      acc = curve;
      for (auto& p : acc) p.net_benefit = p.treat_all = 0.0;
    }
    for (std::size_t i = 0; i < curve.size(); ++i) {
      acc[i].net_benefit += curve[i].net_benefit / kNumClasses;
      acc[i].treat_all += curve[i].treat_all / kNumClasses;
    }
  }
  return acc;
}

std::vector<double> default_dca_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 99; ++i) t.push_back(i / 100.0);
  return t;
}

MetricsSummary summarize(const ScoreSet& s) {
  s.validate();
  MetricsSummary m;
  const auto preds = s.predictions();
  m.confusion = confusion(s.labels, preds);
  m.per_class = per_class_prf1(m.confusion);
  m.accuracy = accuracy(m.confusion);
  for (const auto& c : m.per_class) {
    m.macro_precision += c.precision / kNumClasses;
    m.macro_recall += c.recall / kNumClasses;
    m.macro_f1 += c.f1 / kNumClasses;
  }
  m.auc = auc_ovr(s);
  return m;
}

std::string metrics_csv(const MetricsSummary& m) {
  std::ostringstream out;
  out << "class,precision,recall,f1,auc,degenerate\n";
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& pc = m.per_class[c];
    out << c << ',' << format_double(pc.precision) << ',' << format_double(pc.recall) << ','
        << format_double(pc.f1) << ',' << (m.auc.per_class[c] ? format_double(*m.auc.per_class[c]) : "")
        << ',' << (pc.degenerate ? 1 : 0) << '\n';
  }
  out << "macro," << format_double(m.macro_precision) << ',' << format_double(m.macro_recall) << ','
      << format_double(m.macro_f1) << ',' << format_double(m.auc.macro) << ",\n";
  return out.str();
}

std::string metrics_json(const MetricsSummary& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["macro_precision"] = m.macro_precision;
  j["macro_recall"] = m.macro_recall;
  j["macro_f1"] = m.macro_f1;
  j["macro_auc"] = m.auc.macro;
  j["per_class"] = nlohmann::ordered_json::array();
  for (int c = 0; c < kNumClasses; ++c) {
    nlohmann::ordered_json e;
    e["class"] = c;
    e["precision"] = m.per_class[c].precision;
    e["recall"] = m.per_class[c].recall;
    e["f1"] = m.per_class[c].f1;
    e["degenerate"] = m.per_class[c].degenerate;
    if (m.auc.per_class[c])
      e["auc"] = *m.auc.per_class[c];
    else
      e["auc"] = nullptr;
    j["per_class"].push_back(std::move(e));
  }
  j["confusion"] = m.confusion.counts;
  return j.dump(2) + "\n";
}

ScoreSet read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open " + path);
  ScoreSet s;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kFormat, path + ": empty score file");
  const auto header = split(line, ',');
  if (header.size() != 4 || header[0] != "label")
    fail(ErrorKind::kFormat, path + ": expected header label,p0,p1,p2");
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line, ',');
    if (f.size() != 4) fail(ErrorKind::kFormat, path + ":" + std::to_string(row) + ": expected 4 fields");
    try {
      std::size_t used = 0;
      const int label = std::stoi(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument("label");
      std::array<double, kNumClasses> sc{};
      for (int c = 0; c < kNumClasses; ++c) {
        sc[c] = std::stod(f[c + 1], &used);
        if (used != f[c + 1].size()) throw std::invalid_argument("score");
      }
      s.labels.push_back(label);
      s.scores.push_back(sc);
    } catch (const std::exception&) {
      fail(ErrorKind::kFormat, path + ":" + std::to_string(row) + ": malformed number");
    }
  }
  try {
    s.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, path + ": " + e.what());
  }
  return s;
}

void write_scores_csv(const std::string& path, const ScoreSet& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kMissingInput, "cannot write " + path);
  out << "label,p0,p1,p2\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << s.labels[i] << ',' << format_double(s.scores[i][0]) << ',' << format_double(s.scores[i][1])
        << ',' << format_double(s.scores[i][2]) << '\n';
}

}  // namespace reactkd
