#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reactkd/error.hpp"
#include "reactkd/losses.hpp"
#include "reactkd/region_graph.hpp"
#include "settings.hpp"

namespace reactkd::cli {

// Process exit codes, one per error family.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitMissingInput = 3,
  kExitFormat = 4,
  kExitInvalidArgument = 5,
  kExitDegenerateInput = 6,
  kExitEmptyLiver = 7,
  kExitNotApplicable = 8,
  kExitUnusableConfig = 9,
  kExitDivergence = 10,
};

int exit_code(ErrorKind kind);

// Replay hooks: a manifest supplies the resolved settings, the directory its
// relative paths were written against, and optionally a new output directory.
struct RunOverrides {
  std::optional<std::map<std::string, std::string>> settings;
  std::optional<std::string> cwd;
  std::optional<std::string> out_dir;
};

// Runs one invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const RunOverrides& overrides = {});

std::string version();

// The objective evaluated by the `loss` command. Without a label the focal
// term is reported absent.
LossReport evaluate_loss_files(const RegionGraph& gs, const RegionGraph& gt, const Eigen::VectorXd& zs,
                               const Eigen::VectorXd& zt, std::optional<int> label, const Settings& s);

}  // namespace reactkd::cli
