#include <algorithm>
#include <cmath>
#include <random>

#include "reactkd/distill.hpp"
#include "reactkd/error.hpp"
#include "reactkd/rng.hpp"

namespace reactkd {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::kNone: return "none";
    case Modality::kCt: return "ct";
    case Modality::kPet: return "pet";
  }
  return "?";
}

void DropoutConfig::validate() const {
  require(p_drop >= 0.0 && p_drop <= 1.0, ErrorKind::kInvalidArgument, "p_drop must lie in [0, 1]");
}

Modality draw_dropout(const DropoutConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Both draws are always consumed so the stream position does not depend on
  // the outcome.
  const double u = unit(rng), which = unit(rng);
  if (u >= cfg.p_drop || cfg.p_drop == 0.0) return Modality::kNone;
  if (cfg.allow_ct && cfg.allow_pet) return which < 0.5 ? Modality::kCt : Modality::kPet;
  if (cfg.allow_ct) return Modality::kCt;
  if (cfg.allow_pet) return Modality::kPet;
  return Modality::kNone;
}

DroppedCase modality_dropout(const SyntheticCase& c, const DropoutConfig& cfg, std::mt19937_64& rng) {
  DroppedCase out{c, draw_dropout(cfg, rng)};
  if (out.dropped == Modality::kCt) std::fill(out.data.ct.data.begin(), out.data.ct.data.end(), 0.0f);
  if (out.dropped == Modality::kPet) std::fill(out.data.pet.data.begin(), out.data.pet.data.end(), 0.0f);
  return out;
}

std::string to_string(DegradeLevel l) {
  switch (l) {
    case DegradeLevel::kNative: return "native";
    case DegradeLevel::kMild: return "mild";
    case DegradeLevel::kSevere: return "severe";
    case DegradeLevel::kMixed: return "mixed";
    case DegradeLevel::kCounts: return "counts";
  }
  return "?";
}

DegradeLevel parse_degrade_level(const std::string& s) {
  for (auto l : {DegradeLevel::kNative, DegradeLevel::kMild, DegradeLevel::kSevere, DegradeLevel::kMixed,
                 DegradeLevel::kCounts})
    if (to_string(l) == s) return l;
  fail(ErrorKind::kInvalidArgument, "unknown degradation level '" + s + "'");
}

DegradeConfig DegradeConfig::preset(DegradeLevel level, std::uint64_t seed) {
  DegradeConfig c;
  c.level = level;
  c.seed = seed;
  if (level == DegradeLevel::kMild) c.counts = kMildCounts;
  if (level == DegradeLevel::kSevere || level == DegradeLevel::kMixed) c.counts = kSevereCounts;
  return c;
}

void DegradeConfig::validate() const {
  if (level == DegradeLevel::kNative) return;
  require(std::isfinite(counts) && counts > 0.0, ErrorKind::kInvalidArgument,
          "degradation needs a positive photon count");
}

namespace {

constexpr double kAttenuationPerKiloHu = 0.2;

Volume poisson_proxy(const Volume& v, double counts, std::mt19937_64& rng) {
  Volume out = v;
  for (float& value : out.data) {
    const double a = kAttenuationPerKiloHu * std::max(static_cast<double>(value) + 1000.0, 0.0) / 1000.0;
    std::poisson_distribution<long long> detect(counts * std::exp(-a));
    const double n = std::max(static_cast<double>(detect(rng)), 0.5);
    const double noisy = -std::log(n / counts);
    value = static_cast<float>(noisy / kAttenuationPerKiloHu * 1000.0 - 1000.0);
  }
  return out;
}

}  // namespace

DegradeResult degrade_ct(const Volume& v, const DegradeConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  require(v.all_finite(), ErrorKind::kInvalidArgument, "degradation input must be finite");
  DegradeResult r{v, DegradeLevel::kNative, 0.0};
  DegradeLevel level = cfg.level;
  if (level == DegradeLevel::kMixed) {
    const bool noisy = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5;
    level = noisy ? DegradeLevel::kSevere : DegradeLevel::kNative;
  }
  if (level == DegradeLevel::kNative) return r;
  r.volume = poisson_proxy(v, cfg.counts, rng);
  r.applied = level;
  r.counts = cfg.counts;
  return r;
}

DegradeResult degrade_ct(const Volume& v, const DegradeConfig& cfg, std::uint64_t index) {
  auto rng = make_rng(cfg.seed, kStreamDegrade, index);
  return degrade_ct(v, cfg, rng);
}

}  // namespace reactkd
