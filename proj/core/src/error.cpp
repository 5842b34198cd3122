#include "reactkd/error.hpp"

namespace reactkd {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMissingInput: return "missing-input";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDegenerateInput: return "degenerate-input";
    case ErrorKind::kEmptyLiver: return "empty-liver";
    case ErrorKind::kNotApplicable: return "not-applicable";
    case ErrorKind::kUnusableConfig: return "unusable-configuration";
    case ErrorKind::kDivergence: return "divergence";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace reactkd
