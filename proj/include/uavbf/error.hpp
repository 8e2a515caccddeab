#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uavbf {

enum class ErrorKind {
  ConfigError,
  NonPositiveParameter,
  InvalidParameter,
  InfeasibleHorizon,
  MissingThreshold,
  NoStrictlyFeasibleStart,
  IterationLimit,
  NoSignChange,
  BudgetExceeded,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::InfeasibleHorizon: return "InfeasibleHorizon";
    case ErrorKind::MissingThreshold: return "MissingThreshold";
    case ErrorKind::NoStrictlyFeasibleStart: return "NoStrictlyFeasibleStart";
    case ErrorKind::IterationLimit: return "IterationLimit";
    case ErrorKind::NoSignChange: return "NoSignChange";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace uavbf
