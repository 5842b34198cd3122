#include "reactkd/volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "reactkd/error.hpp"

namespace reactkd {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "RVOL payloads are little-endian; big-endian hosts need byte swapping");

Volume::Volume(Dims d, Spacing s, std::vector<float> values)
    : dims(d), spacing(s), data(std::move(values)) {
  validate();
}

void Volume::validate() const {
  require(dims.positive(), ErrorKind::kInvalidArgument, "volume dims must be positive");
  require(spacing.positive(), ErrorKind::kInvalidArgument, "volume spacing must be positive");
  require(data.size() == dims.count(), ErrorKind::kInvalidArgument,
          "volume data length does not match dims");
}

bool Volume::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void MaskVolume::validate() const {
  require(dims.positive(), ErrorKind::kInvalidArgument, "mask dims must be positive");
  require(spacing.positive(), ErrorKind::kInvalidArgument, "mask spacing must be positive");
  require(labels.size() == dims.count(), ErrorKind::kInvalidArgument,
          "mask label length does not match dims");
}

fs::path rvol_sidecar(const fs::path& path) {
  fs::path p = path;
  if (p.extension() == ".json" || p.extension() == ".raw") p.replace_extension();
  p += ".json";
  return p;
}

fs::path rvol_payload(const fs::path& path) {
  fs::path p = path;
  if (p.extension() == ".json" || p.extension() == ".raw") p.replace_extension();
  p += ".raw";
  return p;
}

namespace {

struct Header {
  Dims dims;
  Spacing spacing;
  std::string dtype;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Header read_header(const fs::path& path) {
  const fs::path side = rvol_sidecar(path);
  if (!fs::exists(side)) fail(ErrorKind::kMissingInput, "missing sidecar " + side.string());
  json j;
  try {
    j = json::parse(slurp(side));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, side.string() + ": " + e.what());
  }
  Header h;
  try {
    const auto& d = j.at("dims");
    const auto& s = j.at("spacing");
    if (d.size() != 3 || s.size() != 3)
      fail(ErrorKind::kFormat, side.string() + ": dims and spacing need three entries");
    h.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
    h.spacing = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    h.dtype = j.at("dtype").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, side.string() + ": " + e.what());
  }
  if (!h.dims.positive()) fail(ErrorKind::kFormat, side.string() + ": dims must be positive");
  if (!h.spacing.positive())
    fail(ErrorKind::kFormat, side.string() + ": spacing must be positive");
  if (h.dtype != "f32" && h.dtype != "u16")
    fail(ErrorKind::kFormat, side.string() + ": unsupported dtype '" + h.dtype + "'");
  return h;
}

std::string read_payload(const fs::path& path, const Header& h) {
  const fs::path raw = rvol_payload(path);
  if (!fs::exists(raw)) fail(ErrorKind::kMissingInput, "missing payload " + raw.string());
  std::string bytes = slurp(raw);
  const std::size_t elem = h.dtype == "f32" ? sizeof(float) : sizeof(std::uint16_t);
  const std::size_t expected = h.dims.count() * elem;
  if (bytes.size() != expected) {
    fail(ErrorKind::kFormat, raw.string() + ": payload has " + std::to_string(bytes.size()) +
                                 " bytes, header implies " + std::to_string(expected));
  }
  return bytes;
}

void write_header(const fs::path& path, const Dims& d, const Spacing& s, const char* dtype) {
  json j;
  j["dims"] = {d.depth, d.height, d.width};
  j["spacing"] = {s.z, s.y, s.x};
  j["dtype"] = dtype;
  std::ofstream out(rvol_sidecar(path), std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kMissingInput, "cannot write " + rvol_sidecar(path).string());
  out << j.dump(2) << '\n';
}

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
  const fs::path raw = rvol_payload(path);
  std::ofstream out(raw, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kMissingInput, "cannot write " + raw.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

}  // namespace

Volume read_volume(const fs::path& path) {
  const Header h = read_header(path);
  const std::string bytes = read_payload(path, h);
  Volume v(h.dims, h.spacing);
  if (h.dtype == "f32") {
    std::memcpy(v.data.data(), bytes.data(), bytes.size());
  } else {
    std::vector<std::uint16_t> raw(h.dims.count());
    std::memcpy(raw.data(), bytes.data(), bytes.size());
    for (std::size_t i = 0; i < raw.size(); ++i) v.data[i] = static_cast<float>(raw[i]);
  }
  if (!v.all_finite())
    fail(ErrorKind::kFormat, rvol_payload(path).string() + ": payload contains non-finite values");
  return v;
}

MaskVolume read_mask(const fs::path& path) {
  const Header h = read_header(path);
  if (h.dtype != "u16")
    fail(ErrorKind::kFormat, rvol_sidecar(path).string() + ": masks must use dtype u16");
  const std::string bytes = read_payload(path, h);
  MaskVolume m(h.dims, h.spacing);
  std::memcpy(m.labels.data(), bytes.data(), bytes.size());
  return m;
}

void write_volume(const fs::path& path, const Volume& v) {
  v.validate();
  write_header(path, v.dims, v.spacing, "f32");
  write_bytes(path, v.data.data(), v.data.size() * sizeof(float));
}

void write_mask(const fs::path& path, const MaskVolume& m) {
  m.validate();
  write_header(path, m.dims, m.spacing, "u16");
  write_bytes(path, m.labels.data(), m.labels.size() * sizeof(std::uint16_t));
}

}  // namespace reactkd
