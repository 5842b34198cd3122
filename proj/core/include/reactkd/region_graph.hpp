#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reactkd/volume.hpp"

namespace reactkd {

// C x D x H x W feature grid, channel-major.
struct FeatureVolume {
  int channels = 0;
  Dims dims;
  std::vector<double> data;

  FeatureVolume() = default;
  FeatureVolume(int c, Dims d)
      : channels(c), dims(d), data(static_cast<std::size_t>(c) * d.count(), 0.0) {}

  double& at(int c, std::size_t voxel) {
    return data[static_cast<std::size_t>(c) * dims.count() + voxel];
  }
  double at(int c, std::size_t voxel) const {
    return data[static_cast<std::size_t>(c) * dims.count() + voxel];
  }

  void validate() const;
};

// Stack scalar volumes sharing one grid into a feature volume.
FeatureVolume stack_channels(const std::vector<const Volume*>& channels);

// Voxel set of one ROI: the liver (tumor voxels excluded) or one tumor component.
struct Region {
  std::uint16_t label = 0;
  std::vector<std::size_t> voxels;  // ascending linear indices
};

struct RegionNode {
  std::uint16_t label = 0;
  std::size_t voxel_count = 0;
  Eigen::VectorXd feature;
};

struct RegionGraph {
  std::vector<RegionNode> nodes;
  Eigen::MatrixXd edges;  // cosine similarity, N x N

  int size() const { return static_cast<int>(nodes.size()); }
  int feature_dim() const { return nodes.empty() ? 0 : static_cast<int>(nodes.front().feature.size()); }
  // Node features as an N x C matrix.
  Eigen::MatrixXd feature_matrix() const;
};

// Liver first, then each 6-connected tumor component ordered by descending
// voxel count, ties by label and then by first voxel index. Tumor regions keep
// their mask label; several components of one label share it.
std::vector<Region> extract_regions(const MaskVolume& m);

// Per-channel mean of `f` over the region voxels.
Eigen::VectorXd masked_gap(const FeatureVolume& f, const Region& region);

// Cosine-similarity graph. Throws kDegenerateInput on a zero-norm feature and
// kInvalidArgument on inconsistent lengths.
RegionGraph build_graph(std::vector<RegionNode> nodes);
RegionGraph build_graph(const std::vector<Eigen::VectorXd>& features);

// masked_gap over every region of a mask, followed by build_graph. When the
// feature grid is coarser than the mask, the mask is first resampled onto the
// feature grid by nearest neighbour.
RegionGraph region_graph(const FeatureVolume& f, const MaskVolume& m);

// Paints each region's score into its voxels; background is 0.
Volume project_node_scores(const MaskVolume& m, const std::vector<Region>& regions,
                           const std::vector<double>& scores);

std::string graph_to_json(const RegionGraph& g);
RegionGraph graph_from_json(const std::string& text);
RegionGraph read_graph(const std::string& path);
void write_graph(const std::string& path, const RegionGraph& g);

}  // namespace reactkd
