#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stbn {

enum class ErrorCode {
  // panel
  MissingFile,
  BadHeader,
  RaggedRow,
  NonNumeric,
  NegativeFlow,
  NonConsecutiveIndex,
  DuplicateSiteId,
  EmptyPanel,
  BadSplit,
  InvalidSpec,
  Io,
  // ranking
  LengthMismatch,
  TooFewSamples,
  ZeroVariance,
  UnknownSite,
  PanelTooShort,
  NotEnoughCandidates,
  InvalidConfig,
  // mixture
  ZeroVarianceColumn,
  DegenerateFit,
  DimensionMismatch,
  NonFiniteInput,
  BadModel,
  // predictor
  SingularBlock,
  InsufficientHistory,
  OutOfRange,
  // evalharness
  Empty,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. The message is prefixed with the
/// error code name so diagnostics printed by the CLI name the failure kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stbn
