#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <random>

#include "reactkd/distill.hpp"
#include "reactkd/error.hpp"
#include "reactkd/morphology.hpp"
#include "reactkd/rng.hpp"

namespace reactkd {

void SynthConfig::validate() const {
  require(dims.depth >= 8 && dims.height >= 8 && dims.width >= 8, ErrorKind::kInvalidArgument,
          "synthetic grid must be at least 8 voxels per axis");
  require(spacing.positive(), ErrorKind::kInvalidArgument, "synthetic spacing must be positive");
  require(tumor_count_fidelity >= 0.0 && tumor_count_fidelity <= 1.0, ErrorKind::kInvalidArgument,
          "tumor count fidelity must lie in [0, 1]");
  require(ct_noise_hu >= 0.0 && pet_noise >= 0.0, ErrorKind::kInvalidArgument,
          "noise levels must be nonnegative");
}

namespace {

struct Sphere {
  double z, y, x, r;
};

// Normalized ellipsoid radius of a point; <= 1 inside.
double ellipsoid_rho(double z, double y, double x, const std::array<double, 3>& c,
                     const std::array<double, 3>& axes) {
  const double dz = (z - c[0]) / axes[0], dy = (y - c[1]) / axes[1], dx = (x - c[2]) / axes[2];
  return std::sqrt(dz * dz + dy * dy + dx * dx);
}

}  // namespace

SyntheticCase synthesize_case(std::uint64_t seed, std::uint64_t index, const SynthConfig& cfg) {
  cfg.validate();
  auto rng = make_rng(seed, kStreamSynthesis, index);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SyntheticCase c;
  c.grade = std::uniform_int_distribution<int>(0, 2)(rng);
  int count = unit(rng) < cfg.tumor_count_fidelity ? c.grade + 1
                                                   : std::uniform_int_distribution<int>(1, 3)(rng);

  const Dims d = cfg.dims;
  const std::array<double, 3> centre{(d.depth - 1) / 2.0 + between(-1.0, 1.0),
                                     (d.height - 1) / 2.0 + between(-1.0, 1.0),
                                     (d.width - 1) / 2.0 + between(-1.0, 1.0)};
  const std::array<double, 3> axes{d.depth * between(0.38, 0.45), d.height * between(0.35, 0.42),
                                   d.width * between(0.35, 0.42)};

  std::vector<Sphere> tumors;
  for (int attempt = 0; attempt < 400 && static_cast<int>(tumors.size()) < count; ++attempt) {
    const double r = between(1.6, 2.6);
    const Sphere s{centre[0] + between(-axes[0], axes[0]), centre[1] + between(-axes[1], axes[1]),
                   centre[2] + between(-axes[2], axes[2]), r};
    const std::array<double, 3> inner{axes[0] - r - 1.0, axes[1] - r - 1.0, axes[2] - r - 1.0};
    if (inner[0] <= 0.0 || ellipsoid_rho(s.z, s.y, s.x, centre, inner) > 1.0) continue;
    const bool clear = std::all_of(tumors.begin(), tumors.end(), [&](const Sphere& o) {
      return std::hypot(s.z - o.z, s.y - o.y, s.x - o.x) > s.r + o.r + 2.0;
    });
    if (clear) tumors.push_back(s);
  }

  MaskVolume raw(d, cfg.spacing);
  for (int z = 0; z < d.depth; ++z)
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x) {
        std::uint16_t l = kBackground;
        if (ellipsoid_rho(z, y, x, centre, axes) <= 1.0) l = kLiver;
        for (std::size_t t = 0; t < tumors.size(); ++t)
          if (std::hypot(z - tumors[t].z, y - tumors[t].y, x - tumors[t].x) <= tumors[t].r)
            l = static_cast<std::uint16_t>(kFirstTumor + t);
        raw.at(z, y, x) = l;
      }
  c.mask = refine_mask(raw);

  std::map<std::uint16_t, std::pair<double, double>> tumor_level;  // label -> (HU, uptake)
  for (std::uint16_t l : c.mask.labels)
    if (l >= kFirstTumor && !tumor_level.count(l)) tumor_level[l] = {};
  for (auto& [label, level] : tumor_level) {
    (void)label;
    level.first = 60.0 - (20.0 + 25.0 * c.grade) + 5.0 * normal(rng);
    level.second = (1.3 + 0.7 * c.grade) * (1.0 + 0.1 * normal(rng));
  }

  c.ct = Volume(d, cfg.spacing);
  c.pet = Volume(d, cfg.spacing);
  for (std::size_t i = 0; i < d.count(); ++i) {
    const std::uint16_t l = c.mask.labels[i];
    double hu = -100.0, uptake = 0.3;
    if (l == kLiver) {
      hu = 60.0;
      uptake = 1.0;
    } else if (l >= kFirstTumor) {
      std::tie(hu, uptake) = tumor_level[l];
    }
    hu += cfg.ct_noise_hu * normal(rng);
    uptake *= 1.0 + cfg.pet_noise * normal(rng);
    c.ct.data[i] = static_cast<float>(hu);
    c.pet.data[i] = static_cast<float>(std::max(uptake, 0.0));
  }
  return c;
}

std::vector<SyntheticCase> synthesize_dataset(int n_cases, std::uint64_t seed, const SynthConfig& cfg) {
  require(n_cases >= 1, ErrorKind::kInvalidArgument, "need at least one synthetic case");
  std::vector<SyntheticCase> out;
  out.reserve(static_cast<std::size_t>(n_cases));
  for (int i = 0; i < n_cases; ++i) out.push_back(synthesize_case(seed, static_cast<std::uint64_t>(i), cfg));
  return out;
}

namespace {

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::uint64_t case_checksum(const SyntheticCase& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv(h, c.ct.data.data(), c.ct.data.size() * sizeof(float));
  fnv(h, c.pet.data.data(), c.pet.data.size() * sizeof(float));
  fnv(h, c.mask.labels.data(), c.mask.labels.size() * sizeof(std::uint16_t));
  const auto g = static_cast<std::uint32_t>(c.grade);
  fnv(h, &g, sizeof g);
  return h;
}

}  // namespace reactkd
