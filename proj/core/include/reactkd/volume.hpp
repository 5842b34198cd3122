#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace reactkd {

// Grid extent in (depth, height, width) order. Width varies fastest in memory.
struct Dims {
  int depth = 0;
  int height = 0;
  int width = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(depth) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  bool positive() const { return depth > 0 && height > 0 && width > 0; }
  std::size_t index(int z, int y, int x) const {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(height) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
  bool contains(int z, int y, int x) const {
    return z >= 0 && z < depth && y >= 0 && y < height && x >= 0 && x < width;
  }
  std::array<int, 3> coords(std::size_t i) const {
    const auto w = static_cast<std::size_t>(width);
    const auto hw = static_cast<std::size_t>(height) * w;
    return {static_cast<int>(i / hw), static_cast<int>((i % hw) / w),
            static_cast<int>(i % w)};
  }

  friend bool operator==(const Dims&, const Dims&) = default;
};

// Voxel size in millimetres, (z, y, x).
struct Spacing {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;

  bool positive() const { return z > 0.0 && y > 0.0 && x > 0.0; }
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

struct Volume {
  Dims dims;
  Spacing spacing;
  std::vector<float> data;

  Volume() = default;
  Volume(Dims d, Spacing s) : dims(d), spacing(s), data(d.count(), 0.0f) {}
  Volume(Dims d, Spacing s, std::vector<float> values);

  float& at(int z, int y, int x) { return data[dims.index(z, y, x)]; }
  float at(int z, int y, int x) const { return data[dims.index(z, y, x)]; }

  // Throws kInvalidArgument when the layout invariants do not hold.
  void validate() const;
  bool all_finite() const;
};

// Label grid: 0 background, 1 liver, >= 2 tumor instances.
struct MaskVolume {
  Dims dims;
  Spacing spacing;
  std::vector<std::uint16_t> labels;

  MaskVolume() = default;
  MaskVolume(Dims d, Spacing s) : dims(d), spacing(s), labels(d.count(), 0) {}

  std::uint16_t& at(int z, int y, int x) { return labels[dims.index(z, y, x)]; }
  std::uint16_t at(int z, int y, int x) const { return labels[dims.index(z, y, x)]; }

  void validate() const;
};

inline constexpr std::uint16_t kBackground = 0;
inline constexpr std::uint16_t kLiver = 1;
inline constexpr std::uint16_t kFirstTumor = 2;

// RVOL: `<name>.json` sidecar plus `<name>.raw` little-endian payload.
// `path` may name the stem, the sidecar, or the payload.
Volume read_volume(const std::filesystem::path& path);
MaskVolume read_mask(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const Volume& v);
void write_mask(const std::filesystem::path& path, const MaskVolume& m);

std::filesystem::path rvol_sidecar(const std::filesystem::path& path);
std::filesystem::path rvol_payload(const std::filesystem::path& path);

}  // namespace reactkd
