#include "settings.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "reactkd/error.hpp"
#include "reactkd/text.hpp"
#include "usage_error.hpp"

namespace reactkd::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

// Arrays are stored without brackets as comma-separated items.
std::string normalize_value(std::string v) {
  v = trim(v);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
    std::string out;
    for (const auto& item : split(v.substr(1, v.size() - 2), ',')) {
      if (!out.empty()) out += ',';
      out += trim(item);
    }
    return out;
  }
  return v;
}

}  // namespace

Settings Settings::defaults() {
  Settings s;
  auto& v = s.values_;
  v["seed"] = "0";

  const PreprocessConfig pre;
  v["preprocess.hu_clip"] = join({pre.hu_clip.first, pre.hu_clip.second});
  v["preprocess.pet_percentiles"] = join({pre.pet_percentiles.first, pre.pet_percentiles.second});
  v["preprocess.target_dims"] = std::to_string(pre.target_dims.depth) + "," +
                                std::to_string(pre.target_dims.height) + "," +
                                std::to_string(pre.target_dims.width);
  v["preprocess.resample"] = "true";

  const GwConfig gw;
  v["gw.epsilon"] = format_double(gw.epsilon);
  v["gw.outer_iters"] = std::to_string(gw.outer_iters);
  v["gw.sinkhorn_iters"] = std::to_string(gw.sinkhorn_iters);
  v["gw.tol"] = format_double(gw.tol);
  v["gw.restarts"] = std::to_string(gw.restarts);
  v["gw.polish_iters"] = std::to_string(gw.polish_iters);

  const TrainConfig train;
  v["loss.tau"] = format_double(train.tau);
  v["loss.lambda_focal"] = format_double(train.weights.lambda_focal);
  v["loss.lambda_logits"] = format_double(train.weights.lambda_logits);
  v["loss.lambda_rgd"] = format_double(train.weights.lambda_rgd);
  v["loss.lambda_node"] = format_double(train.rgd.lambda_node);
  v["loss.lambda_edge"] = format_double(train.rgd.lambda_edge);
  v["loss.lambda_gw"] = format_double(train.rgd.lambda_gw);
  v["loss.focal_alpha"] = join(train.focal.alpha);
  v["loss.focal_gamma"] = format_double(train.focal.gamma);

  v["train.teacher_epochs"] = std::to_string(train.teacher_epochs);
  v["train.student_epochs"] = std::to_string(train.student_epochs);
  v["train.teacher_batch"] = std::to_string(train.teacher_batch);
  v["train.student_batch"] = std::to_string(train.student_batch);
  v["train.teacher_lr"] = format_double(train.teacher_lr);
  v["train.student_lr"] = format_double(train.student_lr);
  v["train.optimizer"] = to_string(train.optimizer);

  const DemoConfig demo;
  v["demo.cases"] = std::to_string(demo.n_cases);
  v["demo.test_fraction"] = format_double(demo.test_fraction);
  v["demo.teacher_channels"] = std::to_string(demo.teacher_channels);
  v["demo.student_channels"] = std::to_string(demo.student_channels);
  v["demo.p_drop"] = format_double(demo.drop.p_drop);
  v["demo.dims"] = std::to_string(demo.synth.dims.depth) + "," + std::to_string(demo.synth.dims.height) +
                   "," + std::to_string(demo.synth.dims.width);

  v["degrade.level"] = "severe";
  v["degrade.counts"] = "0";  // 0 selects the level's preset
  return s;
}

void Settings::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw UsageError("unknown setting '" + key + "'");
  values_[key] = normalize_value(value);
}

void Settings::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    if (!values_.count(full)) throw UsageError(where + ": unknown setting '" + full + "'");
    values_[full] = normalize_value(line.substr(eq + 1));
  }
}

void Settings::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path);
}

const std::string& Settings::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown setting '" + key + "'");
  return it->second;
}

double Settings::real(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw UsageError("setting '" + key + "' expects a number, got '" + v + "'");
}

long long Settings::integer(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw UsageError("setting '" + key + "' expects an integer, got '" + v + "'");
}

std::uint64_t Settings::u64(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() != '-') {
      const unsigned long long d = std::stoull(v, &used);
      if (used == v.size()) return d;
    }
  } catch (const std::exception&) {
  }
  throw UsageError("setting '" + key + "' expects a nonnegative integer, got '" + v + "'");
}

bool Settings::boolean(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("setting '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<double> Settings::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split(str(key), ',')) {
    const std::string t = trim(item);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw UsageError("setting '" + key + "' expects a list of numbers, got '" + str(key) + "'");
    }
  }
  return out;
}

namespace {

std::pair<double, double> pair_of(const Settings& s, const std::string& key) {
  const auto v = s.reals(key);
  if (v.size() != 2) throw UsageError("setting '" + key + "' expects two numbers");
  return {v[0], v[1]};
}

Dims dims_of(const Settings& s, const std::string& key) {
  const auto v = s.reals(key);
  if (v.size() != 3) throw UsageError("setting '" + key + "' expects three extents");
  return {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
}

int int_of(const Settings& s, const std::string& key) { return static_cast<int>(s.integer(key)); }

}  // namespace

PreprocessConfig preprocess_config(const Settings& s) {
  PreprocessConfig c;
  c.hu_clip = pair_of(s, "preprocess.hu_clip");
  c.pet_percentiles = pair_of(s, "preprocess.pet_percentiles");
  c.target_dims = dims_of(s, "preprocess.target_dims");
  c.validate();
  return c;
}

GwConfig gw_config(const Settings& s) {
  GwConfig c;
  c.epsilon = s.real("gw.epsilon");
  c.outer_iters = int_of(s, "gw.outer_iters");
  c.sinkhorn_iters = int_of(s, "gw.sinkhorn_iters");
  c.tol = s.real("gw.tol");
  c.restarts = int_of(s, "gw.restarts");
  c.polish_iters = int_of(s, "gw.polish_iters");
  c.seed = s.u64("seed");
  c.validate();
  return c;
}

RgdWeights rgd_weights(const Settings& s) {
  RgdWeights w{s.real("loss.lambda_node"), s.real("loss.lambda_edge"), s.real("loss.lambda_gw")};
  w.validate();
  return w;
}

TotalWeights total_weights(const Settings& s) {
  TotalWeights w{s.real("loss.lambda_focal"), s.real("loss.lambda_logits"), s.real("loss.lambda_rgd")};
  w.validate();
  return w;
}

FocalConfig focal_config(const Settings& s) {
  FocalConfig f{s.reals("loss.focal_alpha"), s.real("loss.focal_gamma")};
  f.validate(kNumClasses);
  return f;
}

TrainConfig train_config(const Settings& s) {
  TrainConfig c;
  c.teacher_epochs = int_of(s, "train.teacher_epochs");
  c.student_epochs = int_of(s, "train.student_epochs");
  c.teacher_batch = int_of(s, "train.teacher_batch");
  c.student_batch = int_of(s, "train.student_batch");
  c.teacher_lr = s.real("train.teacher_lr");
  c.student_lr = s.real("train.student_lr");
  c.optimizer = parse_optimizer(s.str("train.optimizer"));
  c.tau = s.real("loss.tau");
  c.weights = total_weights(s);
  c.focal = focal_config(s);
  c.rgd = rgd_weights(s);
  c.gw = gw_config(s);
  c.seed = s.u64("seed");
  c.validate();
  return c;
}

DemoConfig demo_config(const Settings& s) {
  DemoConfig c;
  c.n_cases = int_of(s, "demo.cases");
  c.test_fraction = s.real("demo.test_fraction");
  c.teacher_channels = int_of(s, "demo.teacher_channels");
  c.student_channels = int_of(s, "demo.student_channels");
  c.synth.dims = dims_of(s, "demo.dims");
  c.train = train_config(s);
  c.drop.p_drop = s.real("demo.p_drop");
  c.drop.seed = s.u64("seed");
  c.validate();
  return c;
}

DegradeConfig degrade_config(const Settings& s) {
  DegradeConfig c = DegradeConfig::preset(parse_degrade_level(s.str("degrade.level")), s.u64("seed"));
  const double counts = s.real("degrade.counts");
  if (counts != 0.0) c.counts = counts;
  c.validate();
  return c;
}

}  // namespace reactkd::cli
