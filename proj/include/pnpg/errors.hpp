#pragma once

#include <stdexcept>
#include <string>

namespace pnpg {

// Bad shapes, invalid parameters, infeasible starting points.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// A point outside the domain of a likelihood where a gradient was requested.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace pnpg
