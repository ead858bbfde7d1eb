#pragma once

#include <stdexcept>
#include <string>

namespace anlcl {

enum class ErrorKind { io, config, format, numeric, dimension, parameter };

// Process exit code per failure category.
inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::io: return 2;
    case ErrorKind::format: return 4;
    case ErrorKind::numeric: return 5;
    default: return 3;  // config, dimension, parameter
  }
}

inline const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::format: return "format";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::parameter: return "parameter";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(std::string(kind_name(kind)) + " error: " + msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace anlcl
