#pragma once

#include <stdexcept>
#include <string>

namespace dynbif {

enum class ErrorKind { Validation, Numeric, IO };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}
  ErrorKind kind() const { return kind_; }
  // short machine-readable tag, e.g. "resonance_violation"
  const std::string& code() const { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

struct ValidationError : Error {
  ValidationError(std::string code, const std::string& what)
      : Error(ErrorKind::Validation, std::move(code), what) {}
};

struct NumericError : Error {
  NumericError(std::string code, const std::string& what)
      : Error(ErrorKind::Numeric, std::move(code), what) {}
};

struct IOError : Error {
  explicit IOError(const std::string& what) : Error(ErrorKind::IO, "io", what) {}
};

inline void require(bool ok, const char* code, const std::string& msg) {
  if (!ok) throw ValidationError(code, msg);
}

}  // namespace dynbif
