#pragma once

#include <string>
#include <vector>

#include "reactkd/metrics.hpp"

namespace reactkd::cli {

// One-vs-rest ROC curves with per-class and macro AUC labels (3 decimals).
std::string roc_svg(const ScoreSet& s);
// Macro decision curve with the treat-all and treat-none references.
std::string dca_svg(const std::vector<DcaPoint>& curve);

std::string roc_csv(const ScoreSet& s);  // class,fpr,tpr
std::string dca_csv(const std::vector<DcaPoint>& curve);

// Label text used in the ROC figure, e.g. "AUC 0.935" or "AUC n/a".
std::string auc_label(const std::optional<double>& auc);

}  // namespace reactkd::cli
