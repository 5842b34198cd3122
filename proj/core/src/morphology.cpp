#include "reactkd/morphology.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "reactkd/error.hpp"

namespace reactkd {

std::size_t BinaryGrid::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinaryGrid select_label(const MaskVolume& m, std::uint16_t label) {
  BinaryGrid g(m.dims);
  for (std::size_t i = 0; i < m.labels.size(); ++i) g.bits[i] = m.labels[i] == label ? 1 : 0;
  return g;
}

std::vector<std::vector<std::size_t>> connected_components(const BinaryGrid& g) {
  static constexpr int kOffsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                         {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  std::vector<std::vector<std::size_t>> comps;
  std::vector<std::uint8_t> seen(g.bits.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < g.bits.size(); ++seed) {
    if (!g.bits[seed] || seen[seed]) continue;
    std::vector<std::size_t> comp;
    seen[seed] = 1;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      comp.push_back(cur);
      const auto [z, y, x] = g.dims.coords(cur);
      for (const auto& o : kOffsets) {
        const int nz = z + o[0], ny = y + o[1], nx = x + o[2];
        if (!g.dims.contains(nz, ny, nx)) continue;
        const std::size_t n = g.dims.index(nz, ny, nx);
        if (g.bits[n] && !seen[n]) {
          seen[n] = 1;
          stack.push_back(n);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

BinaryGrid largest_component(const BinaryGrid& g) {
  const auto comps = connected_components(g);
  BinaryGrid out(g.dims);
  if (comps.empty()) return out;
  // Ties go to the component found first (smallest voxel index).
  const auto best = std::max_element(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    return a.size() < b.size();
  });
  for (std::size_t i : *best) out.bits[i] = 1;
  return out;
}

namespace {

// Separable 3-tap max (dilate) or min (erode) along each axis; equivalent to
// the 3x3x3 cube structuring element.
BinaryGrid cube_filter(const BinaryGrid& g, bool dilation) {
  const std::uint8_t outside = 0;
  BinaryGrid cur = g;
  const Dims d = g.dims;
  for (int axis = 0; axis < 3; ++axis) {
    BinaryGrid next(d);
    for (int z = 0; z < d.depth; ++z)
      for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x) {
          std::uint8_t acc = dilation ? 0 : 1;
          for (int k = -1; k <= 1; ++k) {
            int zz = z, yy = y, xx = x;
            (axis == 0 ? zz : axis == 1 ? yy : xx) += k;
            const std::uint8_t v = d.contains(zz, yy, xx) ? cur.bits[d.index(zz, yy, xx)] : outside;
            acc = dilation ? (acc | v) : (acc & v);
          }
          next.bits[d.index(z, y, x)] = acc;
        }
    cur = std::move(next);
  }
  return cur;
}

BinaryGrid pad(const BinaryGrid& g, int p) {
  const Dims d{g.dims.depth + 2 * p, g.dims.height + 2 * p, g.dims.width + 2 * p};
  BinaryGrid out(d);
  for (int z = 0; z < g.dims.depth; ++z)
    for (int y = 0; y < g.dims.height; ++y)
      for (int x = 0; x < g.dims.width; ++x)
        out.bits[d.index(z + p, y + p, x + p)] = g.bits[g.dims.index(z, y, x)];
  return out;
}

BinaryGrid crop(const BinaryGrid& g, int p, Dims to) {
  BinaryGrid out(to);
  for (int z = 0; z < to.depth; ++z)
    for (int y = 0; y < to.height; ++y)
      for (int x = 0; x < to.width; ++x)
        out.bits[to.index(z, y, x)] = g.bits[g.dims.index(z + p, y + p, x + p)];
  return out;
}

}  // namespace

BinaryGrid dilate(const BinaryGrid& g) { return cube_filter(g, true); }
BinaryGrid erode(const BinaryGrid& g) { return cube_filter(g, false); }

BinaryGrid close(const BinaryGrid& g, int iterations) {
  require(iterations >= 0, ErrorKind::kInvalidArgument, "closing iterations must be >= 0");
  if (iterations == 0) return g;
  BinaryGrid work = pad(g, iterations);
  for (int i = 0; i < iterations; ++i) work = dilate(work);
  for (int i = 0; i < iterations; ++i) work = erode(work);
  return crop(work, iterations, g.dims);
}

MaskVolume refine_mask(const MaskVolume& m) {
  m.validate();
  constexpr int kClosingIterations = 2;

  const BinaryGrid liver_raw = select_label(m, kLiver);
  if (liver_raw.popcount() == 0) fail(ErrorKind::kEmptyLiver, "mask has no liver voxels");

  struct Tumor {
    std::uint16_t label;
    BinaryGrid core;    // largest component before closing
    BinaryGrid closed;
  };
  std::map<std::uint16_t, std::size_t> present;
  for (std::uint16_t l : m.labels)
    if (l >= kFirstTumor) ++present[l];

  std::vector<Tumor> tumors;
  for (const auto& [label, count] : present) {
    (void)count;
    BinaryGrid core = largest_component(select_label(m, label));
    BinaryGrid closed = close(core, kClosingIterations);
    tumors.push_back({label, std::move(core), std::move(closed)});
  }
  std::stable_sort(tumors.begin(), tumors.end(), [](const Tumor& a, const Tumor& b) {
    return a.closed.popcount() > b.closed.popcount();
  });

  MaskVolume out(m.dims, m.spacing);
  const BinaryGrid liver = close(largest_component(liver_raw), kClosingIterations);
  for (std::size_t i = 0; i < liver.bits.size(); ++i)
    if (liver.bits[i]) out.labels[i] = kLiver;

  // Closing-added voxels first, then each tumor's own voxels, so a tumor's
  // closing never claims voxels another tumor already owned.
  for (std::size_t t = 0; t < tumors.size(); ++t) {
    const auto label = static_cast<std::uint16_t>(kFirstTumor + t);
    for (std::size_t i = 0; i < out.labels.size(); ++i)
      if (tumors[t].closed.bits[i] && out.labels[i] < kFirstTumor) out.labels[i] = label;
  }
  for (std::size_t t = 0; t < tumors.size(); ++t) {
    const auto label = static_cast<std::uint16_t>(kFirstTumor + t);
    for (std::size_t i = 0; i < out.labels.size(); ++i)
      if (tumors[t].core.bits[i]) out.labels[i] = label;
  }

  // Overwriting can fragment a label; keep its largest piece.
  std::vector<std::uint16_t> labels{kLiver};
  for (std::size_t t = 0; t < tumors.size(); ++t)
    labels.push_back(static_cast<std::uint16_t>(kFirstTumor + t));
  for (std::uint16_t l : labels) {
    const BinaryGrid sel = select_label(out, l);
    const BinaryGrid keep = largest_component(sel);
    for (std::size_t i = 0; i < out.labels.size(); ++i)
      if (sel.bits[i] && !keep.bits[i]) out.labels[i] = kBackground;
  }
  if (select_label(out, kLiver).popcount() == 0)
    fail(ErrorKind::kEmptyLiver, "liver fully covered by tumor labels");
  return out;
}

}  // namespace reactkd
