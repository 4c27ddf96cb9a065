#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace curator {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing columns, bad config keys, unusable paths.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Structurally invalid input document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Two artifacts that must agree do not (vocabulary vs target, dims vs checkpoint).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked on a model variant that does not support it.
class WrongVariantError : public Error {
 public:
  using Error::Error;
};

/// Remote provider failed after exhausting its retry budget.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, std::size_t attempts)
      : Error(what + " (after " + std::to_string(attempts) + " attempt(s))"), attempts_(attempts) {}

  std::size_t attempts() const noexcept { return attempts_; }

 private:
  std::size_t attempts_;
};

}  // namespace curator
