#include <algorithm>
#include <cmath>
#include <random>

#include "reactkd/error.hpp"
#include "reactkd/nets.hpp"

namespace reactkd {

Dims Conv3d::output_dims(Dims in) const {
  const int pad = kernel / 2;
  auto ext = [&](int n) { return (n + 2 * pad - kernel) / stride + 1; };
  return {ext(in.depth), ext(in.height), ext(in.width)};
}

void Conv3d::validate() const {
  require(in_channels > 0 && out_channels > 0 && kernel > 0 && kernel % 2 == 1 && stride > 0,
          ErrorKind::kInvalidArgument, "convolution needs positive channels, odd kernel, stride");
  require(weights.size() == static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel * kernel,
          ErrorKind::kInvalidArgument, "convolution weight count mismatch");
  require(bias.size() == static_cast<std::size_t>(out_channels), ErrorKind::kInvalidArgument,
          "convolution bias count mismatch");
}

Conv3d Conv3d::zeros(int in, int out, int kernel, int stride) {
  Conv3d c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = kernel;
  c.stride = stride;
  c.weights.assign(static_cast<std::size_t>(out) * in * kernel * kernel * kernel, 0.0);
  c.bias.assign(static_cast<std::size_t>(out), 0.0);
  return c;
}

Conv3d Conv3d::random(int in, int out, int kernel, int stride, std::uint64_t seed, double scale) {
  Conv3d c = zeros(in, out, kernel, stride);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (double& w : c.weights) w = n(rng);
  return c;
}

FeatureVolume conv3d(const FeatureVolume& f, const Conv3d& c) {
  f.validate();
  c.validate();
  require(f.channels == c.in_channels, ErrorKind::kInvalidArgument,
          "convolution input channels do not match");
  const Dims in = f.dims;
  const Dims od = c.output_dims(in);
  require(od.positive(), ErrorKind::kInvalidArgument, "input too small for the convolution");
  const int pad = c.kernel / 2;
  FeatureVolume out(c.out_channels, od);
  const std::size_t in_plane = in.count(), out_plane = od.count();
  for (int o = 0; o < c.out_channels; ++o) {
    double* dst = out.data.data() + static_cast<std::size_t>(o) * out_plane;
    std::fill(dst, dst + out_plane, c.bias[static_cast<std::size_t>(o)]);
    for (int i = 0; i < c.in_channels; ++i) {
      const double* src = f.data.data() + static_cast<std::size_t>(i) * in_plane;
      for (int kz = 0; kz < c.kernel; ++kz)
        for (int ky = 0; ky < c.kernel; ++ky)
          for (int kx = 0; kx < c.kernel; ++kx) {
            const double wv = c.w(o, i, kz, ky, kx);
            if (wv == 0.0) continue;
            for (int z = 0; z < od.depth; ++z) {
              const int sz = z * c.stride + kz - pad;
              if (sz < 0 || sz >= in.depth) continue;
              for (int y = 0; y < od.height; ++y) {
                const int sy = y * c.stride + ky - pad;
                if (sy < 0 || sy >= in.height) continue;
                const double* row = src + in.index(sz, sy, 0);
                double* drow = dst + od.index(z, y, 0);
                for (int x = 0; x < od.width; ++x) {
                  const int sx = x * c.stride + kx - pad;
                  if (sx >= 0 && sx < in.width) drow[x] += wv * row[sx];
                }
              }
            }
          }
    }
  }
  return out;
}

FeatureVolume instance_norm(const FeatureVolume& f, double eps) {
  f.validate();
  FeatureVolume out = f;
  const std::size_t n = f.dims.count();
  for (int c = 0; c < f.channels; ++c) {
    double* p = out.data.data() + static_cast<std::size_t>(c) * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += p[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) p[i] = (p[i] - mean) * inv;
  }
  return out;
}

FeatureVolume relu(FeatureVolume f) {
  for (double& v : f.data) v = std::max(0.0, v);
  return f;
}

FeatureVolume resunit_forward(const FeatureVolume& f, const ResUnitParams& p) {
  require(p.conv1.in_channels == f.channels && p.conv2.out_channels == f.channels &&
              p.conv1.out_channels == p.conv2.in_channels && p.conv1.stride == 1 && p.conv2.stride == 1,
          ErrorKind::kInvalidArgument, "residual unit channel chain is inconsistent");
  const FeatureVolume z = relu(instance_norm(conv3d(f, p.conv1)));
  FeatureVolume out = conv3d(z, p.conv2);
  require(out.dims == f.dims, ErrorKind::kInvalidArgument, "residual branch changed the grid");
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += f.data[i];
  return out;
}

FeatureVolume downsample_reduce(const FeatureVolume& f, const ResUnitParams& p) {
  f.validate();
  require(f.dims.depth >= 2 && f.dims.height >= 2 && f.dims.width >= 2, ErrorKind::kInvalidArgument,
          "downsampling needs every spatial extent >= 2");
  require(p.down.stride == 2 && p.reduce.kernel == 1 && p.reduce.stride == 1,
          ErrorKind::kInvalidArgument, "expected a stride-2 convolution and a 1x1x1 reduction");
  return conv3d(conv3d(f, p.down), p.reduce);
}

}  // namespace reactkd
