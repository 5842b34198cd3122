#pragma once

// Randomized property suites shared by the unit tests and the acceptance
// runner. Each returns the worst observed discrepancy so callers pick the
// tolerance.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "reactkd/gromov_wasserstein.hpp"
#include "reactkd/losses.hpp"
#include "reactkd/metrics.hpp"
#include "reactkd/nets.hpp"
#include "reactkd/region_graph.hpp"

namespace suite {

using reactkd::LossReport;

inline Eigen::MatrixXd grad_of(const LossReport& r, const char* name) { return r.gradients.at(name).as_matrix(); }

// The cosine graph exactly as the losses compute it, so a plan solved here
// is the plan the library froze.
inline Eigen::MatrixXd library_cosine(const Eigen::MatrixXd& f) {
  Eigen::MatrixXd u = f;
  for (Eigen::Index k = 0; k < u.rows(); ++k) u.row(k) /= f.row(k).norm();
  Eigen::MatrixXd s = u * u.transpose();
  s.diagonal().setOnes();
  return s;
}

struct GradientInstance {
  Eigen::VectorXd z_student, z_teacher;
  int label = 0;
  double tau = 1.0;
  reactkd::FocalConfig focal;
  Eigen::MatrixXd student, teacher, teacher_edges;
  reactkd::TotalWeights total;
  reactkd::RgdWeights rgd;
};

inline GradientInstance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nodes(1, 5), dims(1, 6), label(0, 2);
  std::uniform_real_distribution<double> tau(0.5, 6.0), alpha(0.2, 2.5), gamma(0.0, 3.0), w(0.1, 2.0);
  GradientInstance g;
  g.z_student = oracle::random_matrix(3, 1, rng, 2.0).col(0);
  g.z_teacher = oracle::random_matrix(3, 1, rng, 2.0).col(0);
  g.label = label(rng);
  g.tau = tau(rng);
  g.focal.alpha = {alpha(rng), alpha(rng), alpha(rng)};
  g.focal.gamma = gamma(rng);
  const int n = nodes(rng), c = dims(rng);
  g.student = oracle::random_matrix(n, c, rng);
  g.teacher = oracle::random_matrix(n, c, rng);
  g.teacher_edges = oracle::cosine_matrix(g.teacher);
  g.total = {w(rng), w(rng), w(rng)};
  g.rgd = {w(rng), w(rng), w(rng)};
  return g;
}

// Worst relative gradient error per loss over `instances` random draws.
inline std::map<std::string, double> gradient_suite(int instances, std::uint64_t seed) {
  using namespace reactkd;
  std::mt19937_64 rng(seed);
  std::map<std::string, double> worst{{"kd", 0.0},   {"focal", 0.0}, {"node", 0.0},
                                      {"edge", 0.0}, {"total", 0.0}, {"head", 0.0}};
  auto note = [&](const char* name, double e) { worst[name] = std::max(worst[name], std::isfinite(e) ? e : INFINITY); };
  const GwConfig gw_cfg;

  for (int it = 0; it < instances; ++it) {
    const GradientInstance g = random_instance(rng);
    const auto n = g.student.rows(), c = g.student.cols();

    {
      const auto f = [&](const Eigen::VectorXd& z) { return kd_loss({g.z_teacher, z, g.tau}).value; };
      note("kd", oracle::gradient_error(grad_of(kd_loss({g.z_teacher, g.z_student, g.tau}), kGradStudentLogits).col(0),
                                        oracle::central_difference(f, g.z_student)));
    }
    {
      const auto f = [&](const Eigen::VectorXd& z) { return focal_loss(z, g.label, g.focal).value; };
      note("focal", oracle::gradient_error(grad_of(focal_loss(g.z_student, g.label, g.focal), kGradStudentLogits).col(0),
                                           oracle::central_difference(f, g.z_student)));
    }
    {
      const auto f = [&](const Eigen::VectorXd& x) { return node_loss(oracle::unflatten(x, n, c), g.teacher).value; };
      note("node", oracle::gradient_error(oracle::flatten(grad_of(node_loss(g.student, g.teacher), kGradStudentFeatures)),
                                          oracle::central_difference(f, oracle::flatten(g.student))));
    }
    {
      const auto f = [&](const Eigen::VectorXd& x) { return edge_loss(oracle::unflatten(x, n, c), g.teacher_edges).value; };
      note("edge", oracle::gradient_error(
                       oracle::flatten(grad_of(edge_loss(g.student, g.teacher_edges), kGradStudentFeatures)),
                       oracle::central_difference(f, oracle::flatten(g.student))));
    }
    {
      // Total objective over (student logits, student node features); the GW
      // term is differentiated with its solved plan held fixed.
      const LossReport rgd = rgd_loss(g.student, g.teacher, g.teacher_edges, g.rgd, gw_cfg);
      const LossReport tot = total_loss(focal_loss(g.z_student, g.label, g.focal),
                                        kd_loss({g.z_teacher, g.z_student, g.tau}), rgd, g.total);
      const Eigen::MatrixXd plan = gw_discrepancy(library_cosine(g.student), g.teacher_edges, gw_cfg).plan.matrix;
      const auto value = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd z = x.head(3);
        const Eigen::MatrixXd s = oracle::unflatten(x.tail(n * c), n, c);
        const double r = g.rgd.lambda_node * node_loss(s, g.teacher).value +
                         g.rgd.lambda_edge * edge_loss(s, g.teacher_edges).value +
                         g.rgd.lambda_gw * gw_fixed_plan_loss(s, g.teacher_edges, plan).value;
        return g.total.lambda_focal * focal_loss(z, g.label, g.focal).value +
               g.total.lambda_logits * kd_loss({g.z_teacher, z, g.tau}).value + g.total.lambda_rgd * r;
      };
      Eigen::VectorXd x(3 + n * c), analytic(3 + n * c);
      x << g.z_student, oracle::flatten(g.student);
      analytic << grad_of(tot, kGradStudentLogits).col(0), oracle::flatten(grad_of(tot, kGradStudentFeatures));
      double e = oracle::gradient_error(analytic, oracle::central_difference(value, x));
      if (std::abs(value(x) - tot.value) > 1e-10 * std::max(1.0, tot.value)) e = INFINITY;  // plan drifted
      note("total", e);
    }
    {
      // Head parameters and input under focal + KD on its logits.
      std::uniform_int_distribution<int> in(1, 7);
      const int m = in(rng);
      const StudentHead head{oracle::random_matrix(3, m, rng), oracle::random_matrix(3, 1, rng).col(0)};
      const Eigen::VectorXd stats = oracle::random_matrix(m, 1, rng).col(0);
      const auto objective = [&](const StudentHead& h, const Eigen::VectorXd& s) {
        const Eigen::VectorXd z = student_head_forward(s, h);
        const LossReport f = focal_loss(z, g.label, g.focal), k = kd_loss({g.z_teacher, z, g.tau});
        return std::make_pair(f.value + k.value,
                              Eigen::VectorXd(grad_of(f, kGradStudentLogits).col(0) + grad_of(k, kGradStudentLogits).col(0)));
      };
      const Eigen::VectorXd dz = objective(head, stats).second;
      const HeadGradient hg = student_head_backward(stats, dz);
      Eigen::VectorXd analytic(3 * m + 3 + m), x(3 * m + 3 + m);
      analytic << oracle::flatten(hg.weight), hg.bias, student_head_input_gradient(head, dz);
      x << oracle::flatten(head.weight), head.bias, stats;
      const auto value = [&](const Eigen::VectorXd& v) {
        const StudentHead h{oracle::unflatten(v.head(3 * m), 3, m), v.segment(3 * m, 3)};
        return objective(h, v.tail(m)).first;
      };
      note("head", oracle::gradient_error(analytic, oracle::central_difference(value, x)));
    }
  }
  return worst;
}

struct GwSuiteResult {
  double identical = 0.0;    // worst cost on identical graphs
  double permutation = 0.0;  // worst |gw(Ss, St) - gw(Ss, P St P^T)|
  double grid = 0.0;         // worst |solver - grid oracle| on 2-node pairs
  double below_grid = 0.0;   // worst amount by which the solver beat the grid
};

inline GwSuiteResult gw_suite(int identical, int permutations, int grid_instances, std::uint64_t seed) {
  using namespace reactkd;
  std::mt19937_64 rng(seed);
  GwSuiteResult r;
  for (int t = 0; t < identical; ++t) {
    const Eigen::MatrixXd S = oracle::random_symmetric(1 + t % 6, rng);
    r.identical = std::max(r.identical, gw_discrepancy(S, S).cost);
  }
  for (int t = 0; t < permutations; ++t) {
    const int n = 1 + t % 6, m = 1 + (t / 6) % 6;
    const Eigen::MatrixXd Ss = oracle::random_symmetric(n, rng), St = oracle::random_symmetric(m, rng);
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Eigen::MatrixXd P = oracle::permutation(perm);
    r.permutation = std::max(r.permutation, std::abs(gw_discrepancy(Ss, St).cost -
                                                     gw_discrepancy(Ss, P * St * P.transpose()).cost));
    if (n == m) r.identical = std::max(r.identical, gw_discrepancy(St, P * St * P.transpose()).cost);
  }
  for (int t = 0; t < grid_instances; ++t) {
    const Eigen::MatrixXd A = oracle::random_symmetric(2, rng), B = oracle::random_symmetric(2, rng);
    const double grid = oracle::gw_grid_2x2(A, B), cost = gw_discrepancy(A, B).cost;
    r.grid = std::max(r.grid, std::abs(cost - grid));
    r.below_grid = std::max(r.below_grid, grid - cost);
  }
  return r;
}

struct NetsSuiteResult {
  double row_sum = 0.0;      // worst |sum of an attention row - 1|
  double dense = 0.0;        // worst |library weight - dense oracle weight|
  long masked_nonzero = 0;   // masked pairs given nonzero weight
  long masked_pairs = 0;     // masked pairs inspected
  bool residual_identity = true;
  double conv = 0.0;         // worst |conv3d - direct loop|
};

inline NetsSuiteResult nets_suite(int attention_trials, int conv_trials, std::uint64_t seed) {
  using namespace reactkd;
  std::mt19937_64 rng(seed);
  NetsSuiteResult r;
  const WindowShape shapes[] = {{2, 2, 2}, {2, 3, 3}, {1, 2, 2}, {3, 2, 2}};
  const Dims grids[] = {{4, 4, 4}, {4, 6, 3}, {2, 4, 6}, {3, 4, 2}};
  for (int t = 0; t < attention_trials; ++t) {
    const int shape = t % 4;
    const WindowShape w = shapes[shape];
    Dims grid = grids[shape];
    if (shape == 1) grid = {4, 6, 6};
    const int heads = 1 + t % 2, dim = 4;
    AttentionParams p = AttentionParams::random(3, dim, 5, w, heads, seed + static_cast<std::uint64_t>(t), 0.8);
    p.bias_table = oracle::random_matrix(w.bias_table_size(), heads, rng, 0.5);
    const Eigen::MatrixXd tokens = oracle::random_matrix(static_cast<Eigen::Index>(grid.count()), 3, rng);
    for (bool shifted : {false, true}) {
      std::vector<WindowAttention> trace;
      wmsa_forward(tokens, grid, p, shifted, &trace);
      const auto dense = oracle::dense_window_attention(tokens, grid, p, shifted);
      for (const auto& wa : trace) {
        const auto nw = static_cast<Eigen::Index>(wa.tokens.size());
        for (Eigen::Index i = 0; i < nw; ++i) {
          r.row_sum = std::max(r.row_sum, std::abs(wa.weights.row(i).sum() - 1.0));
          for (Eigen::Index j = 0; j < nw; ++j) {
            const double want = dense[static_cast<std::size_t>(wa.head)](
                static_cast<Eigen::Index>(wa.tokens[static_cast<std::size_t>(i)]),
                static_cast<Eigen::Index>(wa.tokens[static_cast<std::size_t>(j)]));
            r.dense = std::max(r.dense, std::abs(wa.weights(i, j) - want));
            if (want == 0.0) {
              ++r.masked_pairs;
              if (wa.weights(i, j) != 0.0) ++r.masked_nonzero;
            }
          }
        }
      }
    }
  }

  // Zeroed second convolution / zero-parameter attention blocks.
  for (int t = 0; t < 10; ++t) {
    FeatureVolume f(2, {3, 4, 3});
    for (auto& v : f.data) v = std::normal_distribution<double>(0.0, 2.0)(rng);
    ResUnitParams unit;
    unit.conv1 = Conv3d::random(2, 3, 3, 1, seed + 100 + static_cast<std::uint64_t>(t), 0.5);
    unit.conv2 = Conv3d::zeros(3, 2, 3);
    r.residual_identity = r.residual_identity && resunit_forward(f, unit).data == f.data;
    const WindowShape w{1, 2, 2};
    const SwinBlockParams zero{AttentionParams::zeros(3, 3, 4, w, 1), AttentionParams::zeros(3, 3, 4, w, 1)};
    const Eigen::MatrixXd tokens = oracle::random_matrix(8, 3, rng);
    r.residual_identity = r.residual_identity && swin_block_forward(tokens, {2, 2, 2}, zero) == tokens;
  }

  for (int t = 0; t < conv_trials; ++t) {
    std::uniform_int_distribution<int> ch(1, 3), ext(2, 5);
    const int stride = 1 + t % 2, kernel = (t % 3 == 2) ? 1 : 3;
    FeatureVolume f(ch(rng), {ext(rng), ext(rng), ext(rng)});
    for (auto& v : f.data) v = std::normal_distribution<double>()(rng);
    Conv3d c = Conv3d::random(f.channels, ch(rng), kernel, stride, seed + 1000 + static_cast<std::uint64_t>(t), 0.7);
    for (auto& b : c.bias) b = std::normal_distribution<double>()(rng);
    const FeatureVolume got = conv3d(f, c), want = oracle::conv3d(f, c);
    if (got.dims != want.dims) {
      r.conv = INFINITY;
      continue;
    }
    for (std::size_t i = 0; i < got.data.size(); ++i) r.conv = std::max(r.conv, std::abs(got.data[i] - want.data[i]));
  }
  return r;
}

struct MetricsSuiteResult {
  double auc = 0.0;        // worst |Mann-Whitney AUC - pair counting|
  double trapezoid = 0.0;  // worst |trapezoidal ROC area - Mann-Whitney AUC|
  double f1 = 0.0;         // worst |F1 - harmonic mean(P, R)| where both are nonzero
  int auc_cases = 0;
};

// Random three-class score sets; every other set is quantized to force ties.
inline reactkd::ScoreSet random_scores(std::mt19937_64& rng, int n, bool ties) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, 2);
  reactkd::ScoreSet s;
  for (int i = 0; i < n; ++i) {
    std::array<double, 3> row{};
    for (double& v : row) v = ties ? std::round(u(rng) * 4.0) + 1.0 : u(rng) + 1e-3;
    const double total = row[0] + row[1] + row[2];
    for (double& v : row) v /= total;
    s.scores.push_back(row);
    s.labels.push_back(label(rng));
  }
  return s;
}

inline MetricsSuiteResult metrics_suite(int score_sets, int matrices, std::uint64_t seed) {
  using namespace reactkd;
  std::mt19937_64 rng(seed);
  MetricsSuiteResult r;
  std::uniform_int_distribution<int> size(2, 40);
  for (int t = 0; t < score_sets; ++t) {
    const ScoreSet s = random_scores(rng, size(rng), t % 2 == 1);
    for (int c = 0; c < kNumClasses; ++c) {
      std::vector<double> score;
      std::vector<bool> positive;
      std::vector<char> flags;
      for (std::size_t i = 0; i < s.size(); ++i) {
        score.push_back(s.scores[i][static_cast<std::size_t>(c)]);
        positive.push_back(s.labels[i] == c);
        flags.push_back(s.labels[i] == c ? 1 : 0);
      }
      const std::span<const bool> pos(reinterpret_cast<const bool*>(flags.data()), flags.size());
      const auto auc = auc_mann_whitney(score, pos);
      const bool defined = std::count(positive.begin(), positive.end(), true) > 0 &&
                           std::count(positive.begin(), positive.end(), false) > 0;
      if (defined != auc.has_value()) {
        r.auc = INFINITY;
        continue;
      }
      if (!defined) continue;
      ++r.auc_cases;
      r.auc = std::max(r.auc, std::abs(*auc - oracle::auc_pairs(score, positive)));
      r.trapezoid = std::max(r.trapezoid, std::abs(trapezoid_area(roc_curve(score, pos)) - *auc));
    }
  }
  std::uniform_int_distribution<int> count(0, 9);
  for (int t = 0; t < matrices; ++t) {
    ConfusionMatrix cm;
    for (auto& row : cm.counts)
      for (auto& v : row) v = count(rng);
    const auto metrics = per_class_prf1(cm);
    for (int c = 0; c < kNumClasses; ++c) {
      const auto& m = metrics[static_cast<std::size_t>(c)];
      if (m.precision == 0.0 || m.recall == 0.0) continue;
      double tp = 0, fp = 0, fn = 0;
      for (int k = 0; k < kNumClasses; ++k) {
        const auto v = static_cast<double>(cm.counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]);
        const auto w = static_cast<double>(cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]);
        if (k == c) tp = v;
        else fp += v, fn += w;
      }
      r.f1 = std::max(r.f1, std::abs(m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)));
      r.f1 = std::max(r.f1, std::abs(m.f1 - 2.0 * tp / (2.0 * tp + fp + fn)));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Region graphs

// Labels drawn from {background, liver, tumors 2..4}; voxel 0 is always liver.
inline reactkd::MaskVolume random_mask(std::mt19937_64& rng, reactkd::Dims d) {
  std::uniform_int_distribution<int> label(0, 9);
  reactkd::MaskVolume m(d, {});
  for (auto& l : m.labels) {
    const int r = label(rng);
    l = r < 3 ? 0 : r < 7 ? 1 : static_cast<std::uint16_t>(r - 5);
  }
  m.labels[0] = reactkd::kLiver;
  return m;
}

inline reactkd::FeatureVolume random_features(std::mt19937_64& rng, int channels, reactkd::Dims d) {
  std::normal_distribution<double> n;
  reactkd::FeatureVolume f(channels, d);
  for (auto& v : f.data) v = n(rng);
  return f;
}

// Liver, then per-label flood-fill components sorted by size, label, first voxel.
inline std::vector<reactkd::Region> oracle_regions(const reactkd::MaskVolume& m) {
  using reactkd::Region;
  std::vector<Region> out{{reactkd::kLiver, {}}};
  std::set<std::uint16_t> labels;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (m.labels[i] == reactkd::kLiver) out[0].voxels.push_back(i);
    if (m.labels[i] >= reactkd::kFirstTumor) labels.insert(m.labels[i]);
  }
  std::vector<Region> tumors;
  for (std::uint16_t l : labels) {
    std::vector<bool> on(m.labels.size());
    for (std::size_t i = 0; i < on.size(); ++i) on[i] = m.labels[i] == l;
    for (auto& c : oracle::flood_fill(on, m.dims)) tumors.push_back({l, c});
  }
  std::sort(tumors.begin(), tumors.end(), [](const Region& a, const Region& b) {
    return std::make_tuple(-static_cast<long>(a.voxels.size()), a.label, a.voxels[0]) <
           std::make_tuple(-static_cast<long>(b.voxels.size()), b.label, b.voxels[0]);
  });
  out.insert(out.end(), tumors.begin(), tumors.end());
  return out;
}

// Mean of one channel over a region by direct triple loop.
inline double loop_mean(const reactkd::FeatureVolume& f, int channel, const reactkd::Region& r) {
  const std::set<std::size_t> in(r.voxels.begin(), r.voxels.end());
  double sum = 0.0;
  int count = 0;
  for (int z = 0; z < f.dims.depth; ++z)
    for (int y = 0; y < f.dims.height; ++y)
      for (int x = 0; x < f.dims.width; ++x) {
        const std::size_t v = f.dims.index(z, y, x);
        if (!in.count(v)) continue;
        sum += f.at(channel, v);
        ++count;
      }
  return sum / count;
}

struct RegionSuiteResult {
  double gap = 0.0;          // worst |masked_gap - loop mean|
  double symmetry = 0.0;     // worst |E - E^T|
  double diagonal = 0.0;     // worst |E_ii - 1|
  double range = 0.0;        // worst excursion outside [-1, 1]
  double cosine = 0.0;       // worst |E - direct cosine|
  int mask_mismatches = 0;   // masks where extract_regions differs from flood fill
};

inline RegionSuiteResult region_suite(int volumes, int graphs, int masks, std::uint64_t seed) {
  using namespace reactkd;
  std::mt19937_64 rng(seed);
  RegionSuiteResult r;
  for (int t = 0; t < volumes; ++t) {
    const Dims d{3, 3, 3};
    const FeatureVolume f = random_features(rng, 2, d);
    for (const Region& reg : extract_regions(random_mask(rng, d))) {
      const Eigen::VectorXd got = masked_gap(f, reg);
      for (int c = 0; c < 2; ++c) r.gap = std::max(r.gap, std::abs(got(c) - loop_mean(f, c, reg)));
    }
  }
  std::uniform_int_distribution<int> size(1, 6), dim(1, 5);
  for (int t = 0; t < graphs; ++t) {
    const int n = size(rng), c = dim(rng);
    const Eigen::MatrixXd rows = oracle::random_matrix(n, c, rng);
    std::vector<Eigen::VectorXd> feats;
    for (int k = 0; k < n; ++k) feats.push_back(rows.row(k).transpose());
    const Eigen::MatrixXd e = build_graph(feats).edges;
    r.symmetry = std::max(r.symmetry, (e - e.transpose()).cwiseAbs().maxCoeff());
    r.diagonal = std::max(r.diagonal, (e.diagonal().array() - 1.0).abs().maxCoeff());
    r.range = std::max({r.range, e.maxCoeff() - 1.0, -1.0 - e.minCoeff()});
    r.cosine = std::max(r.cosine, (e - oracle::cosine_matrix(rows)).cwiseAbs().maxCoeff());
  }
  for (int t = 0; t < masks; ++t) {
    const MaskVolume m = random_mask(rng, {2 + t % 3, 3 + t % 4, 4});
    const auto got = extract_regions(m), want = oracle_regions(m);
    bool same = got.size() == want.size();
    for (std::size_t k = 0; same && k < got.size(); ++k)
      same = got[k].label == want[k].label && got[k].voxels == want[k].voxels;
    r.mask_mismatches += !same;
  }
  return r;
}

}  // namespace suite
