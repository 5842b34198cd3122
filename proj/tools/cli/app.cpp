#include "app.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "manifest.hpp"
#include "reactkd/distill.hpp"
#include "reactkd/gromov_wasserstein.hpp"
#include "reactkd/losses.hpp"
#include "reactkd/metrics.hpp"
#include "reactkd/morphology.hpp"
#include "reactkd/preprocess.hpp"
#include "reactkd/region_graph.hpp"
#include "reactkd/rng.hpp"
#include "reactkd/text.hpp"
#include "reactkd/volume.hpp"
#include "settings.hpp"
#include "svg.hpp"
#include "usage_error.hpp"

#ifndef REACTKD_VERSION
#define REACTKD_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace reactkd::cli {

std::string version() { return REACTKD_VERSION; }

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMissingInput: return kExitMissingInput;
    case ErrorKind::kFormat: return kExitFormat;
    case ErrorKind::kInvalidArgument: return kExitInvalidArgument;
    case ErrorKind::kDegenerateInput: return kExitDegenerateInput;
    case ErrorKind::kEmptyLiver: return kExitEmptyLiver;
    case ErrorKind::kNotApplicable: return kExitNotApplicable;
    case ErrorKind::kUnusableConfig: return kExitUnusableConfig;
    case ErrorKind::kDivergence: return kExitDivergence;
  }
  return kExitInternal;
}

namespace {

// A flag that, when given, overrides one setting.
struct SettingFlag {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

struct Context {
  Settings settings;
  fs::path cwd;
  fs::path out_dir;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  bool quiet = false;
  std::ostream* out = nullptr;

  fs::path input(const std::string& p) {
    fs::path path = fs::path(p).is_absolute() ? fs::path(p) : cwd / p;
    path = path.lexically_normal();
    inputs.push_back(path.string());
    return path;
  }
  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return out_dir / name;
  }
  void text(const std::string& name, const std::string& content) {
    std::ofstream f(output(name), std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::kMissingInput, "cannot write " + (out_dir / name).string());
    f << content;
  }
  void volume(const std::string& stem, const Volume& v) {
    write_volume(out_dir / stem, v);
    outputs.push_back(stem + ".json");
    outputs.push_back(stem + ".raw");
  }
  void mask(const std::string& stem, const MaskVolume& m) {
    write_mask(out_dir / stem, m);
    outputs.push_back(stem + ".json");
    outputs.push_back(stem + ".raw");
  }
  std::ostream& log() {
    static std::ostream null(nullptr);
    return quiet ? null : *out;
  }
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Eigen::VectorXd read_logits(const fs::path& p) {
  const std::string text = read_text(p);
  try {
    const auto v = nlohmann::json::parse(text).get<std::vector<double>>();
    if (v.empty()) fail(ErrorKind::kFormat, p.string() + ": empty logits array");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kFormat, p.string() + ": expected a JSON array of numbers (" + e.what() + ")");
  }
}

std::string json_matrix(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    j.push_back(row);
  }
  return j.dump();
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// ---------------------------------------------------------------------------
// Commands

struct PreprocessArgs {
  std::string ct, pet, mask;
};

void cmd_preprocess(Context& cx, const PreprocessArgs& a) {
  if (a.ct.empty() && a.pet.empty() && a.mask.empty())
    throw UsageError("preprocess needs at least one of --ct, --pet, --mask");
  const PreprocessConfig cfg = preprocess_config(cx.settings);
  const bool resample_grid = cx.settings.boolean("preprocess.resample");
  if (!a.ct.empty()) {
    Volume v = read_volume(cx.input(a.ct));
    if (resample_grid) v = resample(v, cfg.target_dims);
    cx.volume("ct_preprocessed", preprocess_ct(v, cfg));
  }
  if (!a.pet.empty()) {
    Volume v = read_volume(cx.input(a.pet));
    if (resample_grid) v = resample(v, cfg.target_dims);
    cx.volume("pet_preprocessed", preprocess_pet(v, cfg));
  }
  if (!a.mask.empty()) {
    MaskVolume m = read_mask(cx.input(a.mask));
    if (resample_grid) m = resample_nearest(m, cfg.target_dims);
    cx.mask("mask_refined", refine_mask(m));
  }
  cx.log() << "preprocessed " << cx.outputs.size() / 2 << " volume(s)\n";
}

struct GraphArgs {
  std::string ct, pet, mask;
  std::vector<std::string> features;
  bool refine = false;
};

void cmd_graph(Context& cx, const GraphArgs& a) {
  const Volume ct = read_volume(cx.input(a.ct));
  std::optional<Volume> pet;
  if (!a.pet.empty()) pet = read_volume(cx.input(a.pet));
  MaskVolume mask = read_mask(cx.input(a.mask));
  if (a.refine) mask = refine_mask(mask);

  std::vector<Volume> channels;
  if (a.features.empty()) {
    channels.push_back(ct);
    if (pet) channels.push_back(*pet);
  } else {
    for (const auto& f : a.features) channels.push_back(read_volume(cx.input(f)));
  }
  std::vector<const Volume*> ptrs;
  for (const auto& c : channels) ptrs.push_back(&c);
  const RegionGraph g = region_graph(stack_channels(ptrs), mask);
  cx.text("graph.json", graph_to_json(g));
  cx.log() << "graph with " << g.size() << " node(s), " << g.feature_dim() << " channel(s)\n";
}

struct GwArgs {
  std::string source, target;
};

void cmd_gw(Context& cx, const GwArgs& a) {
  const RegionGraph gs = read_graph(cx.input(a.source).string());
  const RegionGraph gt = read_graph(cx.input(a.target).string());
  const GwResult r = gw_discrepancy(gs.edges, gt.edges, gw_config(cx.settings));
  nlohmann::ordered_json j;
  j["cost"] = r.cost;
  j["converged"] = r.converged;
  j["outer_iterations"] = r.outer_iterations;
  j["polish_iterations"] = r.polish_iterations;
  j["marginal_residual"] = r.plan.marginal_residual();
  j["row_marginal"] = to_std(r.plan.row_marginal);
  j["col_marginal"] = to_std(r.plan.col_marginal);
  j["plan"] = nlohmann::ordered_json::parse(json_matrix(r.plan.matrix));
  cx.text("gw.json", j.dump(2) + "\n");
  cx.log() << "gw cost " << format_double(r.cost) << (r.converged ? "" : " (not converged)") << "\n";
}

struct LossArgs {
  std::string student_graph, teacher_graph, student_logits, teacher_logits;
  std::optional<int> label;
};

}  // namespace

LossReport evaluate_loss_files(const RegionGraph& gs, const RegionGraph& gt, const Eigen::VectorXd& zs,
                               const Eigen::VectorXd& zt, std::optional<int> label, const Settings& s) {
  const LossReport kd = kd_loss({zt, zs, s.real("loss.tau")});
  const LossReport rgd = rgd_loss(gs, gt, rgd_weights(s), gw_config(s));
  const LossReport focal = label ? focal_loss(zs, *label, focal_config(s)) : LossReport{};
  LossReport total = total_loss(focal, kd, rgd, total_weights(s));
  if (!label) {
    total.components.erase("focal");
    total.absent.insert(total.absent.begin(), "focal");
  }
  return total;
}

namespace {

void cmd_loss(Context& cx, const LossArgs& a) {
  const RegionGraph gs = read_graph(cx.input(a.student_graph).string());
  const RegionGraph gt = read_graph(cx.input(a.teacher_graph).string());
  const Eigen::VectorXd zs = read_logits(cx.input(a.student_logits));
  const Eigen::VectorXd zt = read_logits(cx.input(a.teacher_logits));
  const LossReport r = evaluate_loss_files(gs, gt, zs, zt, a.label, cx.settings);
  auto j = nlohmann::ordered_json::parse(loss_report_to_json(r));
  j["gw_only"] = gs.size() != gt.size();
  cx.text("loss.json", j.dump(2) + "\n");
  cx.log() << "loss " << format_double(r.value) << (gs.size() != gt.size() ? " (gw-only graph term)" : "")
           << "\n";
}

void cmd_demo(Context& cx) {
  const DemoConfig cfg = demo_config(cx.settings);
  const DemoResult r = run_demo(cfg);
  cx.text("teacher_history.csv", history_csv(r.teacher_history));
  cx.text("student_history.csv", history_csv(r.student_history));
  for (const auto& [name, scores] : {std::pair{"teacher_scores.csv", &r.teacher_scores},
                                     std::pair{"student_scores.csv", &r.student_scores},
                                     std::pair{"baseline_scores.csv", &r.baseline_scores}}) {
    write_scores_csv((cx.out_dir / name).string(), *scores);
    cx.outputs.push_back(name);
  }
  cx.text("student_metrics.csv", metrics_csv(r.student_metrics));
  cx.text("student_metrics.json", metrics_json(r.student_metrics));
  cx.text("baseline_metrics.json", metrics_json(r.baseline_metrics));
  const auto dca = dca_macro(r.student_scores, default_dca_thresholds());
  cx.text("roc.svg", roc_svg(r.student_scores));
  cx.text("roc.csv", roc_csv(r.student_scores));
  cx.text("dca.svg", dca_svg(dca));
  cx.text("dca.csv", dca_csv(dca));

  nlohmann::ordered_json j;
  j["initial_kd"] = r.initial_kd;
  j["final_kd"] = r.final_kd;
  j["kd_ratio"] = r.initial_kd > 0 ? r.final_kd / r.initial_kd : 0.0;
  j["teacher_macro_f1"] = summarize(r.teacher_scores).macro_f1;
  j["student_macro_f1"] = r.student_metrics.macro_f1;
  j["baseline_macro_f1"] = r.baseline_metrics.macro_f1;
  j["student_macro_auc"] = r.student_metrics.auc.macro;
  j["baseline_macro_auc"] = r.baseline_metrics.auc.macro;
  j["warnings"]["teacher"] = r.teacher_history.warnings;
  j["warnings"]["student"] = r.student_history.warnings;
  cx.text("demo_summary.json", j.dump(2) + "\n");
  cx.log() << "student macro F1 " << format_fixed(r.student_metrics.macro_f1, 3) << " (untrained "
           << format_fixed(r.baseline_metrics.macro_f1, 3) << "), KD " << format_double(r.initial_kd) << " -> "
           << format_double(r.final_kd) << "\n";
  for (const auto& w : r.student_history.warnings) cx.log() << "warning: student " << w << "\n";
}

struct DegradeArgs {
  std::string ct;
};

void cmd_degrade(Context& cx, const DegradeArgs& a) {
  const Volume v = read_volume(cx.input(a.ct));
  const DegradeConfig cfg = degrade_config(cx.settings);
  const DegradeResult r = degrade_ct(v, cfg, 0);
  cx.volume("ct_degraded", r.volume);
  nlohmann::ordered_json j;
  j["level"] = to_string(cfg.level);
  j["applied"] = to_string(r.applied);
  j["counts"] = r.counts;
  j["seed"] = cfg.seed;
  cx.text("degrade.json", j.dump(2) + "\n");
  cx.log() << "degraded CT (" << to_string(r.applied) << ")\n";
}

struct ScoresArgs {
  std::string scores;
};

void cmd_metrics(Context& cx, const ScoresArgs& a) {
  const ScoreSet s = read_scores_csv(cx.input(a.scores).string());
  const MetricsSummary m = summarize(s);
  cx.text("metrics.csv", metrics_csv(m));
  cx.text("metrics.json", metrics_json(m));
  cx.log() << "macro F1 " << format_fixed(m.macro_f1, 3) << ", macro AUC " << format_fixed(m.auc.macro, 3) << "\n";
}

void cmd_report(Context& cx, const ScoresArgs& a) {
  const ScoreSet s = read_scores_csv(cx.input(a.scores).string());
  const auto dca = dca_macro(s, default_dca_thresholds());
  cx.text("roc.svg", roc_svg(s));
  cx.text("roc.csv", roc_csv(s));
  cx.text("dca.svg", dca_svg(dca));
  cx.text("dca.csv", dca_csv(dca));
  cx.log() << "wrote ROC and DCA figures\n";
}

Settings settings_from(const std::map<std::string, std::string>& values) {
  Settings s = Settings::defaults();
  for (const auto& [k, v] : values) s.set(k, v);
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const RunOverrides& overrides) {
  CLI::App app{"Region-graph knowledge distillation toolkit", "reactkd"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", version());

  std::string seed, config_path, out_dir = ".";
  bool quiet = false;
  app.add_option("--seed", seed, "random seed for every stochastic step");
  app.add_option("--config", config_path, "TOML-style settings file");
  app.add_option("--out-dir", out_dir, "directory for outputs and the run manifest");
  app.add_flag("--quiet", quiet, "suppress progress output");

  std::vector<SettingFlag> flags;
  flags.reserve(32);
  auto setting = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    flags.push_back({key, "", nullptr});
    flags.back().option = sub->add_option(name, flags.back().value, help + " [" + key + "]");
  };

  PreprocessArgs pre;
  auto* sub_pre = app.add_subcommand("preprocess", "clip/normalize CT and PET, resample, refine a mask");
  sub_pre->add_option("--ct", pre.ct, "CT volume (RVOL)");
  sub_pre->add_option("--pet", pre.pet, "PET volume (RVOL)");
  sub_pre->add_option("--mask", pre.mask, "label mask (RVOL, u16)");
  setting(sub_pre, "--target", "preprocess.target_dims", "target grid d,h,w");
  bool no_resample = false;
  sub_pre->add_flag("--no-resample", no_resample, "keep the input grid");

  GraphArgs graph;
  auto* sub_graph = app.add_subcommand("graph", "build a region graph from a mask and feature channels");
  sub_graph->add_option("--ct", graph.ct, "CT volume (RVOL)")->required();
  sub_graph->add_option("--pet", graph.pet, "PET volume (RVOL)");
  sub_graph->add_option("--mask", graph.mask, "label mask (RVOL, u16)")->required();
  sub_graph->add_option("--features", graph.features, "feature channels (RVOL); default CT and PET");
  sub_graph->add_flag("--refine", graph.refine, "run mask refinement first");

  GwArgs gw;
  auto* sub_gw = app.add_subcommand("gw", "Gromov-Wasserstein discrepancy between two region graphs");
  sub_gw->add_option("--source", gw.source, "student graph JSON")->required();
  sub_gw->add_option("--target", gw.target, "teacher graph JSON")->required();
  setting(sub_gw, "--epsilon", "gw.epsilon", "entropic regularization");

  LossArgs loss;
  auto* sub_loss = app.add_subcommand("loss", "evaluate the distillation objective on graph and logit files");
  sub_loss->add_option("--student-graph", loss.student_graph, "student graph JSON")->required();
  sub_loss->add_option("--teacher-graph", loss.teacher_graph, "teacher graph JSON")->required();
  sub_loss->add_option("--student-logits", loss.student_logits, "JSON array")->required();
  sub_loss->add_option("--teacher-logits", loss.teacher_logits, "JSON array")->required();
  sub_loss->add_option("--label", loss.label, "class index; enables the focal term");
  setting(sub_loss, "--tau", "loss.tau", "distillation temperature");

  auto* sub_demo = app.add_subcommand("demo", "synthetic two-stage distillation run with evaluation");
  setting(sub_demo, "--cases", "demo.cases", "number of synthetic cases");
  setting(sub_demo, "--teacher-epochs", "train.teacher_epochs", "teacher epochs");
  setting(sub_demo, "--student-epochs", "train.student_epochs", "student epochs");
  setting(sub_demo, "--p-drop", "demo.p_drop", "modality dropout probability");
  bool kd_only = false;
  sub_demo->add_flag("--kd-only", kd_only, "student objective is the logits term alone");

  DegradeArgs deg;
  auto* sub_deg = app.add_subcommand("degrade", "simulate low-dose CT noise");
  sub_deg->add_option("--ct", deg.ct, "CT volume in HU (RVOL)")->required();
  setting(sub_deg, "--level", "degrade.level", "native|mild|severe|mixed|counts");
  setting(sub_deg, "--counts", "degrade.counts", "photons per ray; 0 keeps the level preset");

  ScoresArgs met;
  auto* sub_met = app.add_subcommand("metrics", "classification metrics from a score file");
  sub_met->add_option("--scores", met.scores, "CSV label,p0,p1,p2")->required();

  ScoresArgs rep;
  auto* sub_rep = app.add_subcommand("report", "ROC and decision-curve figures from a score file");
  sub_rep->add_option("--scores", rep.scores, "CSV label,p0,p1,p2")->required();

  std::string replay_path;
  auto* sub_replay = app.add_subcommand("replay", "re-run a command from its run manifest");
  sub_replay->add_option("manifest", replay_path, "path to <command>.manifest.json")->required();

  std::vector<std::string> argv_store{"reactkd"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const auto started = std::chrono::steady_clock::now();
  try {
    if (sub_replay->parsed()) {
      const fs::path mpath = fs::absolute(replay_path);
      const RunManifest m = read_manifest(mpath.string());
      RunOverrides o;
      o.settings = m.config;
      o.cwd = m.cwd;
      o.out_dir = app.get_option("--out-dir")->count() ? fs::absolute(out_dir).string() : m.out_dir;
      return run(m.argv, out, err, o);
    }

    Context cx;
    cx.quiet = quiet;
    cx.out = &out;
    cx.cwd = overrides.cwd ? fs::path(*overrides.cwd) : fs::current_path();
    if (overrides.settings) {
      cx.settings = settings_from(*overrides.settings);
    } else {
      cx.settings = Settings::defaults();
      if (!config_path.empty()) {
        const fs::path cp = fs::path(config_path).is_absolute() ? fs::path(config_path) : cx.cwd / config_path;
        cx.settings.merge_file(cp.string());
      }
      if (!seed.empty()) cx.settings.set("seed", seed);
      for (const auto& f : flags)
        if (f.option->count()) cx.settings.set(f.key, f.value);
      if (no_resample) cx.settings.set("preprocess.resample", "false");
      if (kd_only) {
        cx.settings.set("loss.lambda_focal", "0");
        cx.settings.set("loss.lambda_logits", "1");
        cx.settings.set("loss.lambda_rgd", "0");
      }
    }
    cx.settings.u64("seed");  // validates early
    if (overrides.out_dir) {
      cx.out_dir = *overrides.out_dir;
    } else {
      cx.out_dir = fs::path(out_dir).is_absolute() ? fs::path(out_dir) : cx.cwd / out_dir;
    }
    cx.out_dir = cx.out_dir.lexically_normal();
    fs::create_directories(cx.out_dir);

    std::string command;
    for (auto* sub : app.get_subcommands()) command = sub->get_name();
    if (command == "preprocess") cmd_preprocess(cx, pre);
    else if (command == "graph") cmd_graph(cx, graph);
    else if (command == "gw") cmd_gw(cx, gw);
    else if (command == "loss") cmd_loss(cx, loss);
    else if (command == "demo") cmd_demo(cx);
    else if (command == "degrade") cmd_degrade(cx, deg);
    else if (command == "metrics") cmd_metrics(cx, met);
    else if (command == "report") cmd_report(cx, rep);

    RunManifest m;
    m.command = command;
    m.argv = args;
    m.cwd = cx.cwd.string();
    m.config = cx.settings.values();
    m.seeds["seed"] = cx.settings.u64("seed");
    m.inputs = cx.inputs;
    m.outputs = cx.outputs;
    m.out_dir = cx.out_dir.string();
    m.version = version();
    m.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::ofstream(manifest_path(m.out_dir, command), std::ios::trunc) << manifest_to_json(m);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace reactkd::cli
