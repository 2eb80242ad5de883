#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rwre {

/// Invalid user-supplied configuration (bad spec field, bad parameter).
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Operation refused because a standing assumption (span 1, nondegeneracy) fails.
class AssumptionError : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

/// A numerical procedure could not reach its tolerance, or two routes disagree.
class NumericalError : public std::runtime_error {
  public:
    NumericalError(const std::string& what, double first, double second)
        : std::runtime_error(what), first_(first), second_(second) {}
    double first() const { return first_; }
    double second() const { return second_; }

  private:
    double first_;
    double second_;
};

/// A window or memory budget would be exceeded.
class BudgetError : public std::runtime_error {
  public:
    BudgetError(const std::string& what, std::size_t required)
        : std::runtime_error(what), required_(required) {}
    std::size_t required() const { return required_; }

  private:
    std::size_t required_;
};

}  // namespace rwre
