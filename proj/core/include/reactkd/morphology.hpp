#pragma once

#include <cstdint>
#include <vector>

#include "reactkd/volume.hpp"

namespace reactkd {

// Binary occupancy grid sharing the Dims layout of a volume.
struct BinaryGrid {
  Dims dims;
  std::vector<std::uint8_t> bits;

  BinaryGrid() = default;
  explicit BinaryGrid(Dims d) : dims(d), bits(d.count(), 0) {}

  std::size_t popcount() const;
  friend bool operator==(const BinaryGrid&, const BinaryGrid&) = default;
};

BinaryGrid select_label(const MaskVolume& m, std::uint16_t label);

// 6-connected components. Returns one voxel-index list per component, each
// sorted ascending; components ordered by their smallest voxel index.
std::vector<std::vector<std::size_t>> connected_components(const BinaryGrid& g);

BinaryGrid largest_component(const BinaryGrid& g);

// 3x3x3 (26-neighbourhood) dilation and erosion; voxels outside the grid
// count as background.
BinaryGrid dilate(const BinaryGrid& g);
BinaryGrid erode(const BinaryGrid& g);

// `iterations` dilations followed by the same number of erosions, evaluated on
// a grid padded by `iterations` voxels so the result never loses foreground.
BinaryGrid close(const BinaryGrid& g, int iterations);

// Per foreground class (the liver, and every tumor label independently):
// keep the largest 6-connected component, then close with two iterations.
// Tumors are written over the liver and relabelled 2, 3, ... by descending
// voxel count (ties by original label). Throws kEmptyLiver when label 1 is absent.
MaskVolume refine_mask(const MaskVolume& m);

}  // namespace reactkd
