#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mprg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or unknown names. Carries every violated field, not just
// the first one found.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what), problems_{what} {}
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& parts) {
    std::string out = "invalid configuration:";
    for (const auto& p : parts) out += "\n  - " + p;
    return out;
  }
  std::vector<std::string> problems_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Everything that the CLI reports with the numerical-failure exit code.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The generator produced an all-zero vector before normalization.
class DegenerateLatent : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// The exact subspace projector was handed a vector orthogonal to the range.
class DegenerateProjection : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ProjectionFailure : public NumericalError {
 public:
  explicit ProjectionFailure(const std::string& what,
                             std::optional<std::size_t> iteration = std::nullopt)
      : NumericalError(iteration ? what + " (iteration " + std::to_string(*iteration) + ")"
                                 : what),
        iteration_(iteration) {}

  std::optional<std::size_t> iteration() const { return iteration_; }

 private:
  std::optional<std::size_t> iteration_;
};

}  // namespace mprg
