#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace reactkd::cli {

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;              // arguments after the program name
  std::string cwd;                            // directory relative paths resolve against
  std::map<std::string, std::string> config;  // fully resolved settings
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> inputs;   // absolute paths
  std::vector<std::string> outputs;  // file names inside out_dir
  std::string out_dir;
  std::string version;
  double wall_clock_seconds = 0.0;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);
RunManifest read_manifest(const std::string& path);
// `<out_dir>/<command>.manifest.json`
std::string manifest_path(const std::string& out_dir, const std::string& command);

}  // namespace reactkd::cli
