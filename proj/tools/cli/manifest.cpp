#include "manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "reactkd/error.hpp"

namespace reactkd::cli {

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["cwd"] = m.cwd;
  j["config"] = m.config;
  j["seeds"] = m.seeds;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["out_dir"] = m.out_dir;
  j["version"] = m.version;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.cwd = j.at("cwd").get<std::string>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.out_dir = j.at("out_dir").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed run manifest: ") + e.what());
  }
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open manifest " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

std::string manifest_path(const std::string& out_dir, const std::string& command) {
  return (std::filesystem::path(out_dir) / (command + ".manifest.json")).string();
}

}  // namespace reactkd::cli
