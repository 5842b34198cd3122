#include "reactkd/region_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "reactkd/error.hpp"
#include "reactkd/morphology.hpp"
#include "reactkd/preprocess.hpp"

namespace reactkd {

using json = nlohmann::ordered_json;

void FeatureVolume::validate() const {
  require(channels > 0 && dims.positive(), ErrorKind::kInvalidArgument,
          "feature volume needs positive channels and dims");
  require(data.size() == static_cast<std::size_t>(channels) * dims.count(),
          ErrorKind::kInvalidArgument, "feature volume data length mismatch");
}

FeatureVolume stack_channels(const std::vector<const Volume*>& channels) {
  require(!channels.empty(), ErrorKind::kInvalidArgument, "no channels to stack");
  const Dims d = channels.front()->dims;
  FeatureVolume f(static_cast<int>(channels.size()), d);
  for (std::size_t c = 0; c < channels.size(); ++c) {
    require(channels[c]->dims == d, ErrorKind::kInvalidArgument, "channel dims differ");
    for (std::size_t i = 0; i < d.count(); ++i)
      f.at(static_cast<int>(c), i) = static_cast<double>(channels[c]->data[i]);
  }
  return f;
}

Eigen::MatrixXd RegionGraph::feature_matrix() const {
  Eigen::MatrixXd m(size(), feature_dim());
  for (int k = 0; k < size(); ++k) m.row(k) = nodes[static_cast<std::size_t>(k)].feature.transpose();
  return m;
}

std::vector<Region> extract_regions(const MaskVolume& m) {
  m.validate();
  std::vector<Region> regions;
  Region liver{kLiver, {}};
  std::map<std::uint16_t, BinaryGrid> tumor_bits;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const std::uint16_t l = m.labels[i];
    if (l == kLiver) {
      liver.voxels.push_back(i);
    } else if (l >= kFirstTumor) {
      auto [it, inserted] = tumor_bits.try_emplace(l, m.dims);
      it->second.bits[i] = 1;
    }
  }
  if (liver.voxels.empty()) fail(ErrorKind::kEmptyLiver, "mask has no liver voxels");
  regions.push_back(std::move(liver));

  std::vector<Region> tumors;
  for (const auto& [label, bits] : tumor_bits)
    for (auto& comp : connected_components(bits)) tumors.push_back({label, std::move(comp)});
  std::sort(tumors.begin(), tumors.end(), [](const Region& a, const Region& b) {
    if (a.voxels.size() != b.voxels.size()) return a.voxels.size() > b.voxels.size();
    if (a.label != b.label) return a.label < b.label;
    return a.voxels.front() < b.voxels.front();
  });
  for (auto& t : tumors) regions.push_back(std::move(t));
  return regions;
}

Eigen::VectorXd masked_gap(const FeatureVolume& f, const Region& region) {
  f.validate();
  require(!region.voxels.empty(), ErrorKind::kDegenerateInput, "masked_gap over an empty region");
  Eigen::VectorXd r = Eigen::VectorXd::Zero(f.channels);
  const std::size_t n = f.dims.count();
  for (int c = 0; c < f.channels; ++c) {
    const double* plane = f.data.data() + static_cast<std::size_t>(c) * n;
    double acc = 0.0;
    for (std::size_t v : region.voxels) {
      require(v < n, ErrorKind::kInvalidArgument, "region voxel outside feature grid");
      acc += plane[v];
    }
    r(c) = acc / static_cast<double>(region.voxels.size());
  }
  return r;
}

RegionGraph build_graph(std::vector<RegionNode> nodes) {
  require(!nodes.empty(), ErrorKind::kInvalidArgument, "graph needs at least one node");
  const Eigen::Index dim = nodes.front().feature.size();
  require(dim > 0, ErrorKind::kInvalidArgument, "node features must be non-empty");
  const auto n = static_cast<Eigen::Index>(nodes.size());
  std::vector<double> norms(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    require(nodes[k].feature.size() == dim, ErrorKind::kInvalidArgument,
            "node features have different lengths");
    require(nodes[k].feature.allFinite(), ErrorKind::kInvalidArgument, "node feature not finite");
    norms[k] = nodes[k].feature.norm();
    if (!(norms[k] > 0.0))
      fail(ErrorKind::kDegenerateInput,
           "node " + std::to_string(k) + " has a zero-norm feature; cosine similarity undefined");
  }
  RegionGraph g;
  g.edges.resize(n, n);
  for (Eigen::Index p = 0; p < n; ++p) {
    g.edges(p, p) = 1.0;
    for (Eigen::Index q = p + 1; q < n; ++q) {
      const auto up = static_cast<std::size_t>(p), uq = static_cast<std::size_t>(q);
      const double s = std::clamp(nodes[up].feature.dot(nodes[uq].feature) / (norms[up] * norms[uq]),
                                  -1.0, 1.0);
      g.edges(p, q) = s;
      g.edges(q, p) = s;
    }
  }
  g.nodes = std::move(nodes);
  return g;
}

RegionGraph build_graph(const std::vector<Eigen::VectorXd>& features) {
  std::vector<RegionNode> nodes;
  nodes.reserve(features.size());
  for (std::size_t k = 0; k < features.size(); ++k)
    nodes.push_back({static_cast<std::uint16_t>(k + 1), 1, features[k]});
  return build_graph(std::move(nodes));
}

RegionGraph region_graph(const FeatureVolume& f, const MaskVolume& m) {
  f.validate();
  const MaskVolume on_grid = m.dims == f.dims ? m : resample_nearest(m, f.dims);
  const auto regions = extract_regions(on_grid);
  std::vector<RegionNode> nodes;
  nodes.reserve(regions.size());
  for (const auto& r : regions) nodes.push_back({r.label, r.voxels.size(), masked_gap(f, r)});
  return build_graph(std::move(nodes));
}

Volume project_node_scores(const MaskVolume& m, const std::vector<Region>& regions,
                           const std::vector<double>& scores) {
  m.validate();
  require(scores.size() == regions.size(), ErrorKind::kInvalidArgument,
          "score count does not match region count");
  Volume out(m.dims, m.spacing);
  for (std::size_t k = 0; k < regions.size(); ++k)
    for (std::size_t v : regions[k].voxels) {
      require(v < out.data.size(), ErrorKind::kInvalidArgument, "region voxel outside mask grid");
      out.data[v] = static_cast<float>(scores[k]);
    }
  return out;
}

std::string graph_to_json(const RegionGraph& g) {
  json j;
  j["nodes"] = json::array();
  for (const auto& n : g.nodes) {
    json node;
    node["label"] = n.label;
    node["voxel_count"] = n.voxel_count;
    node["feature"] = std::vector<double>(n.feature.data(), n.feature.data() + n.feature.size());
    j["nodes"].push_back(std::move(node));
  }
  j["edges"] = json::array();
  for (Eigen::Index p = 0; p < g.edges.rows(); ++p) {
    json row = json::array();
    for (Eigen::Index q = 0; q < g.edges.cols(); ++q) row.push_back(g.edges(p, q));
    j["edges"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

RegionGraph graph_from_json(const std::string& text) {
  RegionGraph g;
  try {
    const json j = json::parse(text);
    for (const auto& node : j.at("nodes")) {
      const auto feat = node.at("feature").get<std::vector<double>>();
      RegionNode n;
      n.label = node.at("label").get<std::uint16_t>();
      n.voxel_count = node.at("voxel_count").get<std::size_t>();
      n.feature = Eigen::Map<const Eigen::VectorXd>(feat.data(), static_cast<Eigen::Index>(feat.size()));
      g.nodes.push_back(std::move(n));
    }
    const auto& edges = j.at("edges");
    const auto n = static_cast<Eigen::Index>(g.nodes.size());
    if (static_cast<Eigen::Index>(edges.size()) != n)
      fail(ErrorKind::kFormat, "graph edges must be N x N");
    g.edges.resize(n, n);
    for (Eigen::Index p = 0; p < n; ++p) {
      const auto& row = edges[static_cast<std::size_t>(p)];
      if (static_cast<Eigen::Index>(row.size()) != n) fail(ErrorKind::kFormat, "graph edges must be N x N");
      for (Eigen::Index q = 0; q < n; ++q) g.edges(p, q) = row[static_cast<std::size_t>(q)].get<double>();
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("region graph: ") + e.what());
  }
  if (g.nodes.empty()) fail(ErrorKind::kFormat, "region graph has no nodes");
  for (const auto& n : g.nodes)
    if (n.feature.size() != g.nodes.front().feature.size() || n.feature.size() == 0)
      fail(ErrorKind::kFormat, "region graph node features differ in length");
  if ((g.edges - g.edges.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    fail(ErrorKind::kFormat, "region graph edges are not symmetric");
  return g;
}

RegionGraph read_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return graph_from_json(ss.str());
}

void write_graph(const std::string& path, const RegionGraph& g) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kMissingInput, "cannot write " + path);
  out << graph_to_json(g);
}

}  // namespace reactkd
