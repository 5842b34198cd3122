#pragma once

// Straightforward reference implementations used as test oracles. They favour
// the most literal reading of each definition over speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "reactkd/nets.hpp"
#include "reactkd/region_graph.hpp"
#include "reactkd/volume.hpp"

namespace oracle {

using reactkd::Dims;

// Four nested sums over (i, j, k, l).
inline double gw_quadruple(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St, const Eigen::MatrixXd& pi) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < Ss.rows(); ++i)
    for (Eigen::Index j = 0; j < Ss.rows(); ++j)
      for (Eigen::Index k = 0; k < St.rows(); ++k)
        for (Eigen::Index l = 0; l < St.rows(); ++l) {
          const double d = Ss(i, j) - St(k, l);
          total += d * d * pi(i, k) * pi(j, l);
        }
  return total;
}

// 2x2 couplings with uniform marginals are [[t, 1/2 - t], [1/2 - t, t]].
inline double gw_grid_2x2(const Eigen::MatrixXd& Ss, const Eigen::MatrixXd& St, double step = 1e-4) {
  double best = INFINITY;
  const int n = static_cast<int>(std::lround(0.5 / step));
  for (int s = 0; s <= n; ++s) {
    const double t = s * step;
    Eigen::MatrixXd pi(2, 2);
    pi << t, 0.5 - t, 0.5 - t, t;
    best = std::min(best, gw_quadruple(Ss, St, pi));
  }
  return best;
}

inline Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = u(rng);
  return m;
}

inline Eigen::MatrixXd cosine_matrix(const Eigen::MatrixXd& rows) {
  Eigen::MatrixXd s(rows.rows(), rows.rows());
  for (Eigen::Index p = 0; p < rows.rows(); ++p)
    for (Eigen::Index q = 0; q < rows.rows(); ++q) {
      double dot = 0, np = 0, nq = 0;
      for (Eigen::Index c = 0; c < rows.cols(); ++c) {
        dot += rows(p, c) * rows(q, c);
        np += rows(p, c) * rows(p, c);
        nq += rows(q, c) * rows(q, c);
      }
      s(p, q) = dot / (std::sqrt(np) * std::sqrt(nq));
    }
  return s;
}

inline Eigen::MatrixXd permutation(const std::vector<int>& perm) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(perm.size()),
                                            static_cast<Eigen::Index>(perm.size()));
  for (std::size_t i = 0; i < perm.size(); ++i) p(static_cast<Eigen::Index>(i), perm[i]) = 1.0;
  return p;
}

// Recursive-free flood fill over face neighbours; components as voxel sets,
// sorted by descending size then smallest voxel.
inline std::vector<std::vector<std::size_t>> flood_fill(const std::vector<bool>& on, Dims d) {
  std::vector<int> seen(on.size(), 0);
  std::vector<std::vector<std::size_t>> comps;
  for (std::size_t s = 0; s < on.size(); ++s) {
    if (!on[s] || seen[s]) continue;
    std::vector<std::size_t> comp, stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      const auto c = d.coords(v);
      const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
      for (const auto& o : nb) {
        const int z = c[0] + o[0], y = c[1] + o[1], x = c[2] + o[2];
        if (!d.contains(z, y, x)) continue;
        const std::size_t w = d.index(z, y, x);
        if (on[w] && !seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(comp);
  }
  std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return comps;
}

// Dilation/erosion read straight from the definition: a voxel is set when any
// (all) of its 27 neighbours inside the grid are set; outside counts as unset.
inline std::vector<bool> dilate(const std::vector<bool>& on, Dims d) {
  std::vector<bool> out(on.size(), false);
  for (std::size_t v = 0; v < on.size(); ++v) {
    const auto c = d.coords(v);
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (d.contains(c[0] + dz, c[1] + dy, c[2] + dx) && on[d.index(c[0] + dz, c[1] + dy, c[2] + dx)])
            out[v] = true;
  }
  return out;
}

inline std::vector<bool> erode(const std::vector<bool>& on, Dims d) {
  std::vector<bool> out(on.size(), true);
  for (std::size_t v = 0; v < on.size(); ++v) {
    const auto c = d.coords(v);
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int z = c[0] + dz, y = c[1] + dy, x = c[2] + dx;
          if (!d.contains(z, y, x) || !on[d.index(z, y, x)]) out[v] = false;
        }
  }
  return out;
}

// Direct convolution with zero padding kernel / 2.
inline reactkd::FeatureVolume conv3d(const reactkd::FeatureVolume& f, const reactkd::Conv3d& c) {
  const int pad = c.kernel / 2;
  auto ext = [&](int n) { return (n + 2 * pad - c.kernel) / c.stride + 1; };
  const Dims od{ext(f.dims.depth), ext(f.dims.height), ext(f.dims.width)};
  reactkd::FeatureVolume out(c.out_channels, od);
  for (int o = 0; o < c.out_channels; ++o)
    for (int z = 0; z < od.depth; ++z)
      for (int y = 0; y < od.height; ++y)
        for (int x = 0; x < od.width; ++x) {
          double acc = c.bias[static_cast<std::size_t>(o)];
          for (int i = 0; i < c.in_channels; ++i)
            for (int kz = 0; kz < c.kernel; ++kz)
              for (int ky = 0; ky < c.kernel; ++ky)
                for (int kx = 0; kx < c.kernel; ++kx) {
                  const int sz = z * c.stride + kz - pad, sy = y * c.stride + ky - pad, sx = x * c.stride + kx - pad;
                  if (!f.dims.contains(sz, sy, sx)) continue;
                  acc += c.w(o, i, kz, ky, kx) * f.at(i, f.dims.index(sz, sy, sx));
                }
          out.at(o, od.index(z, y, x)) = acc;
        }
  return out;
}

// Dense shifted-window attention: the full N x N score matrix over original
// token indices, with -inf wherever two tokens fall in different rolled
// windows or, in shifted mode, in different sub-regions of the rolled grid
// (the three slices [0, n-w), [n-w, n-s), [n-s, n) per shifted axis). Returns
// one softmaxed N x N matrix per head.
inline std::vector<Eigen::MatrixXd> dense_window_attention(const Eigen::MatrixXd& tokens, Dims grid,
                                                           const reactkd::AttentionParams& p, bool shifted) {
  const int n = static_cast<int>(tokens.rows());
  const int ext[3] = {grid.depth, grid.height, grid.width};
  const int win[3] = {p.window.depth, p.window.height, p.window.width};
  int shift[3] = {0, 0, 0};
  if (shifted)
    for (int a = 0; a < 3; ++a) shift[a] = win[a] / 2;
  std::vector<std::array<int, 3>> rolled(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const auto c = grid.coords(static_cast<std::size_t>(t));
    for (int a = 0; a < 3; ++a) rolled[static_cast<std::size_t>(t)][a] = ((c[a] - shift[a]) % ext[a] + ext[a]) % ext[a];
  }
  auto slice = [&](int a, int r) {
    if (shift[a] == 0) return 0;
    return r < ext[a] - win[a] ? 0 : r < ext[a] - shift[a] ? 1 : 2;
  };
  const Eigen::MatrixXd q = tokens * p.w_q, k = tokens * p.w_k;
  const int dh = p.dim() / p.heads;
  std::vector<Eigen::MatrixXd> out;
  for (int h = 0; h < p.heads; ++h) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Constant(n, n, -INFINITY);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const auto& ri = rolled[static_cast<std::size_t>(i)];
        const auto& rj = rolled[static_cast<std::size_t>(j)];
        bool ok = true;
        for (int a = 0; a < 3; ++a) ok = ok && ri[a] / win[a] == rj[a] / win[a] && slice(a, ri[a]) == slice(a, rj[a]);
        if (!ok) continue;
        int off[3];
        for (int a = 0; a < 3; ++a) off[a] = ri[a] % win[a] - rj[a] % win[a] + win[a] - 1;
        const int b = (off[0] * (2 * win[1] - 1) + off[1]) * (2 * win[2] - 1) + off[2];
        double dot = 0.0;
        for (int c = 0; c < dh; ++c) dot += q(i, h * dh + c) * k(j, h * dh + c);
        s(i, j) = dot / std::sqrt(static_cast<double>(dh)) + p.bias_table(b, h);
      }
    for (int i = 0; i < n; ++i) {
      const double m = s.row(i).maxCoeff();
      double z = 0.0;
      for (int j = 0; j < n; ++j) z += std::exp(s(i, j) - m);
      for (int j = 0; j < n; ++j) s(i, j) = std::exp(s(i, j) - m) / z;
    }
    out.push_back(s);
  }
  return out;
}

// Fraction of positive-negative pairs ranked correctly, ties worth 1/2.
inline double auc_pairs(const std::vector<double>& score, const std::vector<bool>& positive) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i)
    for (std::size_t j = 0; j < score.size(); ++j) {
      if (!positive[i] || positive[j]) continue;
      pairs += 1.0;
      wins += score[i] > score[j] ? 1.0 : score[i] == score[j] ? 0.5 : 0.0;
    }
  return wins / pairs;
}

// Central difference of a scalar function along every coordinate of x.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

// max |analytic - numeric| relative to the numeric gradient's scale (floored
// at 1e-3 so near-zero gradients are compared absolutely).
inline double gradient_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-3);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

inline Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

inline Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace oracle
