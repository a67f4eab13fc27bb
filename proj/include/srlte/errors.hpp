#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace srlte {

// Base for every error raised by the library. `code()` is a stable,
// machine-readable tag (e.g. "complete-separation") used by the CLI's
// error records.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Bad shapes, malformed files, parameters outside their domain.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error("input", what) {}
  InputError(std::string code, const std::string& what)
      : Error(std::move(code), what) {}
};

class ParameterDomainError : public InputError {
 public:
  explicit ParameterDomainError(const std::string& what)
      : InputError("parameter-domain", what) {}
};

// Separation, singular information matrices, degenerate IRLS weights.
class NumericalError : public Error {
 public:
  NumericalError(std::string code, const std::string& what)
      : Error(std::move(code), what) {}
};

}  // namespace srlte
