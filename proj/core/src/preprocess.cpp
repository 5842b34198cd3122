#include "reactkd/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "reactkd/error.hpp"

namespace reactkd {

void PreprocessConfig::validate() const {
  require(hu_clip.first < hu_clip.second, ErrorKind::kInvalidArgument,
          "hu_clip low must be below high");
  require(pet_percentiles.first < pet_percentiles.second && pet_percentiles.first >= 0.0 &&
              pet_percentiles.second <= 100.0,
          ErrorKind::kInvalidArgument, "pet_percentiles must satisfy 0 <= low < high <= 100");
  require(target_dims.positive(), ErrorKind::kInvalidArgument, "target dims must be positive");
}

double percentile(std::span<const float> values, double p) {
  require(!values.empty(), ErrorKind::kInvalidArgument, "percentile of empty set");
  require(p >= 0.0 && p <= 100.0, ErrorKind::kInvalidArgument, "percentile outside [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

void require_finite(const Volume& v, const char* what) {
  v.validate();
  require(v.all_finite(), ErrorKind::kInvalidArgument, std::string(what) + ": non-finite input");
}

// Two-pass population statistics in double precision.
std::pair<double, double> mean_std(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  return {mean, std::sqrt(var)};
}

Volume zscore(const Volume& like, const std::vector<double>& x, const char* what) {
  const auto [mean, sd] = mean_std(x);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
    fail(ErrorKind::kDegenerateInput, std::string(what) + ": constant volume cannot be normalized");
  Volume out(like.dims, like.spacing);
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data[i] = static_cast<float>((x[i] - mean) / sd);
  return out;
}

}  // namespace

Volume preprocess_ct(const Volume& v, const PreprocessConfig& cfg) {
  cfg.validate();
  require_finite(v, "preprocess_ct");
  std::vector<double> clipped(v.data.size());
  for (std::size_t i = 0; i < v.data.size(); ++i)
    clipped[i] = std::clamp(static_cast<double>(v.data[i]), cfg.hu_clip.first, cfg.hu_clip.second);
  return zscore(v, clipped, "preprocess_ct");
}

Volume pet_minmax(const Volume& v, const PreprocessConfig& cfg) {
  cfg.validate();
  require_finite(v, "preprocess_pet");
  const double lo = percentile(v.data, cfg.pet_percentiles.first);
  const double hi = percentile(v.data, cfg.pet_percentiles.second);
  if (!(hi > lo)) fail(ErrorKind::kDegenerateInput, "preprocess_pet: constant volume after clipping");
  Volume out(v.dims, v.spacing);
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    const double c = std::clamp(static_cast<double>(v.data[i]), lo, hi);
    out.data[i] = static_cast<float>((c - lo) / (hi - lo));
  }
  return out;
}

Volume preprocess_pet(const Volume& v, const PreprocessConfig& cfg) {
  const Volume scaled = pet_minmax(v, cfg);
  std::vector<double> x(scaled.data.begin(), scaled.data.end());
  return zscore(scaled, x, "preprocess_pet");
}

namespace {

struct AxisSample {
  int i0;
  int i1;
  double t;  // weight on i1; may fall outside [0, 1] at the borders
};

std::vector<AxisSample> axis_samples(int src, int dst) {
  std::vector<AxisSample> out(static_cast<std::size_t>(dst));
  for (int i = 0; i < dst; ++i) {
    if (src == 1) {
      out[static_cast<std::size_t>(i)] = {0, 0, 0.0};
      continue;
    }
    const double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(src) /
                           static_cast<double>(dst) -
                       0.5;
    int i0 = static_cast<int>(std::floor(pos));
    i0 = std::clamp(i0, 0, src - 2);
    out[static_cast<std::size_t>(i)] = {i0, i0 + 1, pos - static_cast<double>(i0)};
  }
  return out;
}

int nearest_index(int i, int src, int dst) {
  const double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(src) /
                     static_cast<double>(dst);
  return std::clamp(static_cast<int>(std::floor(pos)), 0, src - 1);
}

Spacing scaled_spacing(const Spacing& s, Dims src, Dims dst) {
  return {s.z * src.depth / dst.depth, s.y * src.height / dst.height, s.x * src.width / dst.width};
}

}  // namespace

Volume resample(const Volume& v, Dims target) {
  v.validate();
  require(target.positive(), ErrorKind::kInvalidArgument, "resample target must be positive");
  if (target == v.dims) return v;
  const auto az = axis_samples(v.dims.depth, target.depth);
  const auto ay = axis_samples(v.dims.height, target.height);
  const auto ax = axis_samples(v.dims.width, target.width);
  Volume out(target, scaled_spacing(v.spacing, v.dims, target));
  for (int z = 0; z < target.depth; ++z) {
    const auto& sz = az[static_cast<std::size_t>(z)];
    for (int y = 0; y < target.height; ++y) {
      const auto& sy = ay[static_cast<std::size_t>(y)];
      for (int x = 0; x < target.width; ++x) {
        const auto& sx = ax[static_cast<std::size_t>(x)];
        auto f = [&](int zz, int yy, int xx) { return static_cast<double>(v.at(zz, yy, xx)); };
        auto lerp_x = [&](int zz, int yy) {
          return (1.0 - sx.t) * f(zz, yy, sx.i0) + sx.t * f(zz, yy, sx.i1);
        };
        auto lerp_y = [&](int zz) {
          return (1.0 - sy.t) * lerp_x(zz, sy.i0) + sy.t * lerp_x(zz, sy.i1);
        };
        out.at(z, y, x) = static_cast<float>((1.0 - sz.t) * lerp_y(sz.i0) + sz.t * lerp_y(sz.i1));
      }
    }
  }
  return out;
}

MaskVolume resample_nearest(const MaskVolume& m, Dims target) {
  m.validate();
  require(target.positive(), ErrorKind::kInvalidArgument, "resample target must be positive");
  if (target == m.dims) return m;
  MaskVolume out(target, scaled_spacing(m.spacing, m.dims, target));
  for (int z = 0; z < target.depth; ++z) {
    const int sz = nearest_index(z, m.dims.depth, target.depth);
    for (int y = 0; y < target.height; ++y) {
      const int sy = nearest_index(y, m.dims.height, target.height);
      for (int x = 0; x < target.width; ++x)
        out.at(z, y, x) = m.at(sz, sy, nearest_index(x, m.dims.width, target.width));
    }
  }
  return out;
}

}  // namespace reactkd
