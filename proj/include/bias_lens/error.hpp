#pragma once

#include <stdexcept>
#include <string>

namespace bias_lens {

// Input that violates a documented contract: malformed files, broken
// invariants, bad arguments. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failures while executing otherwise valid input (scorer errors, IO after
// validation). The CLI maps these to exit code 1.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bias_lens
