#pragma once

#include <stdexcept>
#include <string>

namespace modngd {

// Raised when a mathematical precondition of the method does not hold,
// e.g. the Jacobian is rank deficient so the tangent kernel is singular.
class AssumptionViolation : public std::runtime_error {
 public:
  explicit AssumptionViolation(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration key, value, or file. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Output directory already holds results and --force was not given.
// CLI maps this to exit code 3.
class OverwriteRefusal : public std::runtime_error {
 public:
  explicit OverwriteRefusal(const std::string& msg) : std::runtime_error(msg) {}
};

// A report subcommand found missing or inconsistent artifacts.
// CLI maps this to exit code 4.
class ReportError : public std::runtime_error {
 public:
  explicit ReportError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace modngd
