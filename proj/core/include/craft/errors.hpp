#pragma once

#include <stdexcept>
#include <string>

namespace craft {

/// API contract violated by the caller (bad preconditions, missing annotations).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Value outside its admissible range (schedule bounds, config fields, ...).
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-finite intermediates, divergent samplers, overflow guards.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed, truncated or version-incompatible on-disk artifacts.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace craft
