#pragma once

#include <stdexcept>
#include <string>

namespace labeldist {

// Malformed input: bad config keys, unreadable files, schema violations.
// CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss.  CLI maps this to exit code 3.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace labeldist
