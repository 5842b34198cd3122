#pragma once

#include <span>
#include <utility>
#include <vector>

#include "reactkd/volume.hpp"

namespace reactkd {

struct PreprocessConfig {
  std::pair<double, double> hu_clip{-160.0, 240.0};
  std::pair<double, double> pet_percentiles{1.0, 99.0};
  Dims target_dims{64, 224, 224};

  void validate() const;
};

// Percentile with linear interpolation between closest ranks
// (rank = p/100 * (n - 1) over the sorted values).
double percentile(std::span<const float> values, double p);

// Clip to the HU window, then z-score with mean and population std of the
// clipped volume. Throws kDegenerateInput when the clipped volume is constant.
Volume preprocess_ct(const Volume& v, const PreprocessConfig& cfg = {});

// Percentile clip followed by min-max scaling to [0, 1]; both endpoints attained.
Volume pet_minmax(const Volume& v, const PreprocessConfig& cfg = {});

// pet_minmax followed by a per-volume z-score.
Volume preprocess_pet(const Volume& v, const PreprocessConfig& cfg = {});

// Trilinear resampling with voxel centres aligned: output voxel i samples the
// source at (i + 0.5) * src / dst - 0.5. Samples falling outside the outermost
// source centres are extrapolated linearly from the two border samples, so the
// operator reproduces any trilinear field exactly. Spacing scales by src/dst.
Volume resample(const Volume& v, Dims target);

// Nearest-neighbour label resampling under the same centre alignment.
MaskVolume resample_nearest(const MaskVolume& m, Dims target);

}  // namespace reactkd
