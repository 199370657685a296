#pragma once

#include <stdexcept>
#include <string>

namespace pwopsd {

/// Malformed arguments: out-of-range indices, invalid distributions, bad configs.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Well-formed input on which the quantity is undefined (single-class AUROC,
/// all-zero mass, every bootstrap resample degenerate).
class DegenerateInput : public std::domain_error {
 public:
  explicit DegenerateInput(const std::string& what) : std::domain_error(what) {}
};

/// Log-ratio support violations.
class NumericDomain : public std::domain_error {
 public:
  explicit NumericDomain(const std::string& what) : std::domain_error(what) {}
};

}  // namespace pwopsd
