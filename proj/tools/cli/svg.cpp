#include "svg.hpp"

#include <algorithm>
#include <sstream>

#include "reactkd/text.hpp"

namespace reactkd::cli {

namespace {

constexpr double kWidth = 480, kHeight = 400;
constexpr double kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#7f7f7f"};

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const {
    y = std::clamp(y, y0, y1);
    return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

std::string num(double v) { return format_fixed(v, 2); }

void open_svg(std::ostringstream& out, const Frame& f, const std::string& title, const std::string& xlabel,
              const std::string& ylabel) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(kWidth / 2) << "\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
  out << "<polyline fill=\"none\" stroke=\"black\" points=\"" << num(f.px(f.x0)) << ',' << num(f.py(f.y1)) << ' '
      << num(f.px(f.x0)) << ',' << num(f.py(f.y0)) << ' ' << num(f.px(f.x1)) << ',' << num(f.py(f.y0))
      << "\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0, y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out << "<text x=\"" << num(f.px(x)) << "\" y=\"" << num(kHeight - kBottom + 16)
        << "\" text-anchor=\"middle\">" << format_fixed(x, 2) << "</text>\n";
    out << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(f.py(y) + 4) << "\" text-anchor=\"end\">"
        << format_fixed(y, 2) << "</text>\n";
  }
  out << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << num(kHeight - 12)
      << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  out << "<text x=\"14\" y=\"" << num((kTop + kHeight - kBottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << num((kTop + kHeight - kBottom) / 2) << ")\">" << ylabel << "</text>\n";
}

void polyline(std::ostringstream& out, const Frame& f, const std::vector<std::pair<double, double>>& pts,
              const char* color, bool dashed = false) {
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
  if (dashed) out << " stroke-dasharray=\"4 3\"";
  out << " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i)
    out << (i ? " " : "") << num(f.px(pts[i].first)) << ',' << num(f.py(pts[i].second));
  out << "\"/>\n";
}

void legend(std::ostringstream& out, int row, const char* color, const std::string& text) {
  const double y = kTop + 14 + 16 * row;
  const double x = kWidth - kRight - 150;
  out << "<line x1=\"" << num(x) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(x + 18) << "\" y2=\""
      << num(y - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
  out << "<text x=\"" << num(x + 24) << "\" y=\"" << num(y) << "\">" << text << "</text>\n";
}

std::vector<RocPoint> class_roc(const ScoreSet& s, int c) {
  std::vector<double> score(s.size());
  std::vector<char> pos(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    score[i] = s.scores[i][c];
    pos[i] = s.labels[i] == c;
  }
  return roc_curve(score, std::span<const bool>(reinterpret_cast<const bool*>(pos.data()), pos.size()));
}

}  // namespace

std::string auc_label(const std::optional<double>& auc) {
  return auc ? "AUC " + format_fixed(*auc, 3) : std::string("AUC n/a");
}

std::string roc_svg(const ScoreSet& s) {
  const AucResult auc = auc_ovr(s);
  const Frame f{0, 1, 0, 1};
  std::ostringstream out;
  open_svg(out, f, "ROC (one-vs-rest)", "false positive rate", "true positive rate");
  polyline(out, f, {{0, 0}, {1, 1}}, kColors[3], true);
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : class_roc(s, c)) pts.emplace_back(p.fpr, p.tpr);
    polyline(out, f, pts, kColors[c]);
    legend(out, c, kColors[c], "class " + std::to_string(c) + " " + auc_label(auc.per_class[c]));
  }
  legend(out, kNumClasses, kColors[3], "macro " + auc_label(auc.macro));
  out << "</svg>\n";
  return out.str();
}

std::string dca_svg(const std::vector<DcaPoint>& curve) {
  double top = 0.05;
  for (const auto& p : curve) top = std::max({top, p.net_benefit, p.treat_all});
  const Frame f{0, 1, -0.05, top + 0.05};
  std::ostringstream out;
  open_svg(out, f, "Decision curve (macro)", "threshold probability", "net benefit");
  std::vector<std::pair<double, double>> model, all, none;
  for (const auto& p : curve) {
    model.emplace_back(p.threshold, p.net_benefit);
    all.emplace_back(p.threshold, p.treat_all);
    none.emplace_back(p.threshold, p.treat_none);
  }
  polyline(out, f, all, kColors[3], true);
  polyline(out, f, none, "black", true);
  polyline(out, f, model, kColors[0]);
  legend(out, 0, kColors[0], "model");
  legend(out, 1, kColors[3], "treat all");
  legend(out, 2, "black", "treat none");
  out << "</svg>\n";
  return out.str();
}

std::string roc_csv(const ScoreSet& s) {
  std::ostringstream out;
  out << "class,fpr,tpr\n";
  for (int c = 0; c < kNumClasses; ++c)
    for (const auto& p : class_roc(s, c)) out << c << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
  return out.str();
}

std::string dca_csv(const std::vector<DcaPoint>& curve) {
  std::ostringstream out;
  out << "threshold,net_benefit,treat_all,treat_none\n";
  for (const auto& p : curve)
    out << format_double(p.threshold) << ',' << format_double(p.net_benefit) << ',' << format_double(p.treat_all)
        << ',' << format_double(p.treat_none) << '\n';
  return out.str();
}

}  // namespace reactkd::cli
