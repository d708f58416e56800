#pragma once

#include <stdexcept>
#include <string>

namespace misp {

// Error categories map 1:1 onto CLI exit codes so scripts can branch on
// the failure class without parsing the message text.
enum class ErrorCategory {
  Config,   // bad model/sampler/plan configuration
  Data,     // malformed or out-of-contract input data
  Index,    // index out of range
  Domain,   // argument outside the mathematical domain
  Numeric,  // conditioning/convergence failure
  Plan,     // invalid cross-validation plan
  Io,       // file system / parse failure
};

inline const char* error_category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Index: return "index";
    case ErrorCategory::Domain: return "domain";
    case ErrorCategory::Numeric: return "numeric";
    case ErrorCategory::Plan: return "plan";
    case ErrorCategory::Io: return "io";
  }
  return "unknown";
}

inline int error_category_exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Index: return 4;
    case ErrorCategory::Domain: return 5;
    case ErrorCategory::Numeric: return 6;
    case ErrorCategory::Plan: return 7;
    case ErrorCategory::Io: return 8;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void throw_error(ErrorCategory c, const std::string& msg) {
  throw Error(c, msg);
}

}  // namespace misp
