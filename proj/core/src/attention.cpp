#include <cmath>
#include <limits>

#include "reactkd/error.hpp"
#include "reactkd/nets.hpp"
#include "reactkd/rng.hpp"

namespace reactkd {

void AttentionParams::validate() const {
  const int c = channels(), d = dim();
  require(c > 0 && d > 0, ErrorKind::kInvalidArgument, "attention projections are empty");
  require(w_k.rows() == c && w_k.cols() == d && w_v.rows() == c && w_v.cols() == d,
          ErrorKind::kInvalidArgument, "W_Q, W_K, W_V must share a C x d shape");
  require(heads > 0 && d % heads == 0, ErrorKind::kInvalidArgument, "d must be divisible by heads");
  require(window.depth > 0 && window.height > 0 && window.width > 0, ErrorKind::kInvalidArgument,
          "window extent must be positive");
  require(bias_table.rows() == window.bias_table_size() && bias_table.cols() == heads,
          ErrorKind::kInvalidArgument, "relative-position bias table has the wrong shape");
  require(bias_table.allFinite(), ErrorKind::kInvalidArgument, "bias table is not finite");
}

namespace {

LayerNormParams unit_norm(int c) { return {Eigen::VectorXd::Ones(c), Eigen::VectorXd::Zero(c)}; }

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

AttentionParams AttentionParams::zeros(int channels, int dim, int hidden, WindowShape window, int heads) {
  AttentionParams p;
  p.w_q = Eigen::MatrixXd::Zero(channels, dim);
  p.w_k = Eigen::MatrixXd::Zero(channels, dim);
  p.w_v = Eigen::MatrixXd::Zero(channels, dim);
  p.window = window;
  p.heads = heads;
  p.bias_table = Eigen::MatrixXd::Zero(window.bias_table_size(), heads);
  p.mlp = {Eigen::MatrixXd::Zero(channels, hidden), Eigen::VectorXd::Zero(hidden),
           Eigen::MatrixXd::Zero(hidden, channels), Eigen::VectorXd::Zero(channels)};
  p.norm1 = {Eigen::VectorXd::Zero(channels), Eigen::VectorXd::Zero(channels)};
  p.norm2 = {Eigen::VectorXd::Zero(channels), Eigen::VectorXd::Zero(channels)};
  return p;
}

AttentionParams AttentionParams::random(int channels, int dim, int hidden, WindowShape window, int heads,
                                        std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  AttentionParams p;
  p.w_q = gaussian(channels, dim, rng, scale);
  p.w_k = gaussian(channels, dim, rng, scale);
  p.w_v = gaussian(channels, dim, rng, scale);
  p.window = window;
  p.heads = heads;
  // Relative-position bias starts at zero.
  p.bias_table = Eigen::MatrixXd::Zero(window.bias_table_size(), heads);
  p.mlp = {gaussian(channels, hidden, rng, scale), gaussian(hidden, 1, rng, scale),
           gaussian(hidden, channels, rng, scale), gaussian(channels, 1, rng, scale)};
  p.norm1 = unit_norm(channels);
  p.norm2 = unit_norm(channels);
  return p;
}

std::array<int, 3> window_shift(const WindowShape& w) {
  return {w.depth / 2, w.height / 2, w.width / 2};
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& tokens, const LayerNormParams& p, double eps) {
  require(p.gain.size() == tokens.cols() && p.offset.size() == tokens.cols(),
          ErrorKind::kInvalidArgument, "layer-norm parameters do not match the token width");
  Eigen::MatrixXd out(tokens.rows(), tokens.cols());
  for (Eigen::Index r = 0; r < tokens.rows(); ++r) {
    const double mean = tokens.row(r).mean();
    const double var = (tokens.row(r).array() - mean).square().mean();
    out.row(r) = ((tokens.row(r).array() - mean) / std::sqrt(var + eps) * p.gain.transpose().array() +
                  p.offset.transpose().array())
                     .matrix();
  }
  return out;
}

Eigen::MatrixXd mlp_forward(const Eigen::MatrixXd& tokens, const MlpParams& p) {
  require(p.w1.rows() == tokens.cols() && p.b1.size() == p.w1.cols() && p.w2.rows() == p.w1.cols() &&
              p.b2.size() == p.w2.cols(),
          ErrorKind::kInvalidArgument, "MLP parameter shapes do not chain");
  Eigen::MatrixXd h = tokens * p.w1;
  h.rowwise() += p.b1.transpose();
  h = h.unaryExpr([](double x) { return gelu(x); });
  Eigen::MatrixXd out = h * p.w2;
  out.rowwise() += p.b2.transpose();
  return out;
}

Eigen::MatrixXd wmsa_forward(const Eigen::MatrixXd& tokens, Dims grid, const AttentionParams& p,
                             bool shifted, std::vector<WindowAttention>* trace) {
  p.validate();
  const WindowShape& w = p.window;
  require(grid.positive() && grid.depth % w.depth == 0 && grid.height % w.height == 0 &&
              grid.width % w.width == 0,
          ErrorKind::kInvalidArgument, "token grid must be a multiple of the window");
  require(static_cast<std::size_t>(tokens.rows()) == grid.count(), ErrorKind::kInvalidArgument,
          "token count does not match the grid");
  require(tokens.cols() == p.channels(), ErrorKind::kInvalidArgument,
          "token width does not match W_Q rows");

  const Eigen::MatrixXd q = tokens * p.w_q;
  const Eigen::MatrixXd k = tokens * p.w_k;
  const Eigen::MatrixXd v = tokens * p.w_v;
  const int dh = p.dim() / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::array<int, 3> shift = shifted ? window_shift(w) : std::array<int, 3>{0, 0, 0};
  const std::array<int, 3> extent = {grid.depth, grid.height, grid.width};
  const std::array<int, 3> wext = {w.depth, w.height, w.width};

  // Sub-region of a rolled-grid coordinate along one axis (0, 1 or 2).
  auto region_of = [&](int axis, int pos) {
    if (shift[axis] == 0) return 0;
    if (pos < extent[axis] - wext[axis]) return 0;
    if (pos < extent[axis] - shift[axis]) return 1;
    return 2;
  };

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(tokens.rows(), p.dim());
  const int nw = w.volume();
  std::vector<std::size_t> ids(nw);
  std::vector<std::array<int, 3>> local(nw);
  std::vector<int> region(nw);
  for (int wz = 0; wz < grid.depth; wz += w.depth)
    for (int wy = 0; wy < grid.height; wy += w.height)
      for (int wx = 0; wx < grid.width; wx += w.width) {
        int t = 0;
        for (int lz = 0; lz < w.depth; ++lz)
          for (int ly = 0; ly < w.height; ++ly)
            for (int lx = 0; lx < w.width; ++lx, ++t) {
              // Rolled coordinate (wz+lz, ...) holds the token at +shift, wrapped.
              const int rz = wz + lz, ry = wy + ly, rx = wx + lx;
              ids[t] = grid.index((rz + shift[0]) % grid.depth, (ry + shift[1]) % grid.height,
                                  (rx + shift[2]) % grid.width);
              local[t] = {lz, ly, lx};
              region[t] = (region_of(0, rz) * 3 + region_of(1, ry)) * 3 + region_of(2, rx);
            }

        for (int h = 0; h < p.heads; ++h) {
          Eigen::MatrixXd a(nw, nw);
          std::vector<std::vector<bool>> allowed(nw, std::vector<bool>(nw, true));
          for (int i = 0; i < nw; ++i) {
            double row_max = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < nw; ++j) {
              allowed[i][j] = region[i] == region[j];
              if (!allowed[i][j]) continue;
              const int oz = local[i][0] - local[j][0] + w.depth - 1;
              const int oy = local[i][1] - local[j][1] + w.height - 1;
              const int ox = local[i][2] - local[j][2] + w.width - 1;
              const int bias_idx = (oz * (2 * w.height - 1) + oy) * (2 * w.width - 1) + ox;
              const double s = scale * q.row(ids[i]).segment(h * dh, dh).dot(k.row(ids[j]).segment(h * dh, dh)) +
                               p.bias_table(bias_idx, h);
              a(i, j) = s;
              row_max = std::max(row_max, s);
            }
            double total = 0.0;
            for (int j = 0; j < nw; ++j) {
              a(i, j) = allowed[i][j] ? std::exp(a(i, j) - row_max) : 0.0;
              total += a(i, j);
            }
            a.row(i) /= total;
          }
          for (int i = 0; i < nw; ++i) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(dh);
            for (int j = 0; j < nw; ++j)
              if (a(i, j) != 0.0) acc += a(i, j) * v.row(ids[j]).segment(h * dh, dh).transpose();
            out.row(ids[i]).segment(h * dh, dh) = acc.transpose();
          }
          if (trace) trace->push_back({ids, h, a, allowed});
        }
      }
  return out;
}

Eigen::MatrixXd wmsa_forward(const Eigen::MatrixXd& tokens, const AttentionParams& p, bool shifted,
                             std::vector<WindowAttention>* trace) {
  require(tokens.rows() == p.window.volume(), ErrorKind::kInvalidArgument,
          "token count does not match the window volume");
  return wmsa_forward(tokens, p.window.as_dims(), p, shifted, trace);
}

namespace {

Eigen::MatrixXd sub_block(const Eigen::MatrixXd& z, Dims grid, const AttentionParams& p, bool shifted) {
  require(p.dim() == p.channels(), ErrorKind::kInvalidArgument,
          "residual attention needs d equal to the token width");
  const Eigen::MatrixXd zhat = wmsa_forward(layer_norm(z, p.norm1), grid, p, shifted) + z;
  return mlp_forward(layer_norm(zhat, p.norm2), p.mlp) + zhat;
}

}  // namespace

Eigen::MatrixXd swin_block_forward(const Eigen::MatrixXd& tokens, Dims grid, const SwinBlockParams& p) {
  return sub_block(sub_block(tokens, grid, p.regular, false), grid, p.shifted, true);
}

Eigen::MatrixXd swin_block_forward(const Eigen::MatrixXd& tokens, const SwinBlockParams& p) {
  return swin_block_forward(tokens, p.regular.window.as_dims(), p);
}

Eigen::MatrixXd to_tokens(const FeatureVolume& f) {
  f.validate();
  const auto n = static_cast<Eigen::Index>(f.dims.count());
  Eigen::MatrixXd t(n, f.channels);
  for (int c = 0; c < f.channels; ++c)
    for (Eigen::Index i = 0; i < n; ++i) t(i, c) = f.at(c, static_cast<std::size_t>(i));
  return t;
}

FeatureVolume from_tokens(const Eigen::MatrixXd& tokens, Dims dims) {
  require(static_cast<std::size_t>(tokens.rows()) == dims.count(), ErrorKind::kInvalidArgument,
          "token count does not match dims");
  FeatureVolume f(static_cast<int>(tokens.cols()), dims);
  for (int c = 0; c < f.channels; ++c)
    for (Eigen::Index i = 0; i < tokens.rows(); ++i) f.at(c, static_cast<std::size_t>(i)) = tokens(i, c);
  return f;
}

}  // namespace reactkd
