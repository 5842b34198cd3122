#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "reactkd/error.hpp"
#include "reactkd/nets.hpp"

namespace reactkd {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void CbamParams::validate(int channels) const {
  require(reduction > 0 && channels % reduction == 0, ErrorKind::kInvalidArgument,
          "CBAM reduction ratio must divide the channel count");
  const int hidden = channels / reduction;
  require(w1.rows() == hidden && w1.cols() == channels && b1.size() == hidden && w2.rows() == channels &&
              w2.cols() == hidden && b2.size() == channels,
          ErrorKind::kInvalidArgument, "CBAM channel MLP shapes do not match");
  spatial.validate();
  require(spatial.in_channels == 2 && spatial.out_channels == 1 && spatial.stride == 1,
          ErrorKind::kInvalidArgument, "CBAM spatial convolution must map 2 -> 1 channels");
}

CbamParams CbamParams::zeros(int channels, int reduction, int kernel) {
  CbamParams p;
  p.reduction = reduction;
  const int hidden = std::max(1, channels / std::max(1, reduction));
  p.w1 = Eigen::MatrixXd::Zero(hidden, channels);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2 = Eigen::MatrixXd::Zero(channels, hidden);
  p.b2 = Eigen::VectorXd::Zero(channels);
  p.spatial = Conv3d::zeros(2, 1, kernel);
  return p;
}

CbamParams CbamParams::random(int channels, int reduction, int kernel, std::uint64_t seed, double scale) {
  CbamParams p = zeros(channels, reduction, kernel);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = n(rng);
  p.spatial = Conv3d::random(2, 1, kernel, 1, seed ^ 0x5bd1e995ULL, scale / kernel);
  return p;
}

FeatureVolume cbam3d_forward(const FeatureVolume& f, const CbamParams& p, CbamTrace* trace) {
  f.validate();
  p.validate(f.channels);
  const std::size_t n = f.dims.count();

  Eigen::VectorXd avg(f.channels), mx(f.channels);
  for (int c = 0; c < f.channels; ++c) {
    const double* plane = f.data.data() + static_cast<std::size_t>(c) * n;
    double s = 0.0, m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      s += plane[i];
      m = std::max(m, plane[i]);
    }
    avg(c) = s / static_cast<double>(n);
    mx(c) = m;
  }
  auto mlp = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd h = (p.w1 * x + p.b1).cwiseMax(0.0);
    return Eigen::VectorXd(p.w2 * h + p.b2);
  };
  const Eigen::VectorXd pre = mlp(avg) + mlp(mx);
  const Eigen::VectorXd cgate = pre.unaryExpr([](double x) { return sigmoid(x); });

  FeatureVolume gated = f;
  for (int c = 0; c < f.channels; ++c) {
    double* plane = gated.data.data() + static_cast<std::size_t>(c) * n;
    for (std::size_t i = 0; i < n; ++i) plane[i] *= cgate(c);
  }

  FeatureVolume pooled(2, f.dims);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0, m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < f.channels; ++c) {
      const double v = gated.at(c, i);
      s += v;
      m = std::max(m, v);
    }
    pooled.at(0, i) = s / static_cast<double>(f.channels);
    pooled.at(1, i) = m;
  }
  const FeatureVolume logits = conv3d(pooled, p.spatial);
  std::vector<double> sgate(n);
  for (std::size_t i = 0; i < n; ++i) sgate[i] = sigmoid(logits.data[i]);

  for (int c = 0; c < f.channels; ++c) {
    double* plane = gated.data.data() + static_cast<std::size_t>(c) * n;
    for (std::size_t i = 0; i < n; ++i) plane[i] *= sgate[i];
  }
  if (trace) {
    trace->channel_gate = cgate;
    trace->spatial_gate = std::move(sgate);
  }
  return gated;
}

}  // namespace reactkd
