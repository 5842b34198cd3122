#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reactkd {

// Error families. The CLI maps each family to a distinct exit code.
enum class ErrorKind {
  kMissingInput,       // file not found or unreadable
  kFormat,             // malformed file, length mismatch, non-finite payload
  kInvalidArgument,    // precondition violated (shapes, ranges)
  kDegenerateInput,    // constant volume, zero-norm feature, empty region
  kEmptyLiver,         // mask carries no liver voxels
  kNotApplicable,      // node/edge loss on graphs of different cardinality
  kUnusableConfig,     // configuration that cannot produce a loss
  kDivergence,         // training produced a non-finite loss
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace reactkd
