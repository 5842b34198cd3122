#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reactkd/distill.hpp"
#include "reactkd/gromov_wasserstein.hpp"
#include "reactkd/losses.hpp"
#include "reactkd/preprocess.hpp"

namespace reactkd::cli {

// Flat "section.key" -> value store. Resolution order: built-in defaults, then
// the --config file, then command-line flags.
class Settings {
 public:
  static Settings defaults();

  // Parses TOML-style text: `[section]` headers, `key = value` lines and `#`
  // comments. Values may be quoted strings, numbers, booleans or flat arrays.
  void merge_text(const std::string& text, const std::string& origin);
  void merge_file(const std::string& path);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

PreprocessConfig preprocess_config(const Settings& s);
GwConfig gw_config(const Settings& s);
RgdWeights rgd_weights(const Settings& s);
TotalWeights total_weights(const Settings& s);
FocalConfig focal_config(const Settings& s);
TrainConfig train_config(const Settings& s);
DemoConfig demo_config(const Settings& s);
DegradeConfig degrade_config(const Settings& s);

}  // namespace reactkd::cli
