// Apache License, Version 2.0, refer to LICENSE.txt
#ifndef COUNTREG_ERRORS_HPP_
#define COUNTREG_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace countreg {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorCategory {
  kConfig = 2,   // bad flags, malformed config, inconsistent options
  kData = 3,     // unparseable or invalid input data
  kNumeric = 4,  // series truncation or sampler failed to converge
  kIo = 5,       // unreadable/unwritable files
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

// Raised when a truncated series fails its stopping criterion within the term
// cap, or a rejection sampler exceeds its attempt guard.
class NonConvergenceError : public Error {
 public:
  explicit NonConvergenceError(const std::string& what) : Error(ErrorCategory::kNumeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

}  // namespace countreg

#endif  // COUNTREG_ERRORS_HPP_
