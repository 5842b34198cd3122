#pragma once

#include <stdexcept>

namespace reactkd::cli {

// Bad flags, unknown settings or malformed setting values.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace reactkd::cli
