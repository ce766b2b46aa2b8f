#pragma once

#include <stdexcept>
#include <string>

namespace tsr {

/// Invalid user configuration (bad counts, degenerate domains, CFL violations).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value or query fell outside the domain on which it is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Rejection sampling could not cover the agent envelope.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss term became NaN or infinite. `term()` names the offending term.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string term, const std::string& what)
      : std::runtime_error(what), term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace tsr
