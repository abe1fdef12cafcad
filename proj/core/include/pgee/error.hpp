#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pgee {

enum class ErrorCode {
  // dataset validation
  NonBinaryOutcome,
  SingletonCluster,
  RaggedCovariates,
  TooFewClusters,
  NonFiniteCovariate,
  DuplicateClusterId,
  MalformedInput,
  // numerical kernel
  InvalidWorkingModel,
  SingularV,
  SingularInformation,
  SingularLeverage,
  // inference
  ZeroSE,
  // data generation
  BracketFailure,
  SingularR,
  InvalidScenario,
  // simulation
  TooFewConverged,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pgee
