#include "stbn/error.hpp"

namespace stbn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFile:
      return "MissingFile";
    case ErrorCode::BadHeader:
      return "BadHeader";
    case ErrorCode::RaggedRow:
      return "RaggedRow";
    case ErrorCode::NonNumeric:
      return "NonNumeric";
    case ErrorCode::NegativeFlow:
      return "NegativeFlow";
    case ErrorCode::NonConsecutiveIndex:
      return "NonConsecutiveIndex";
    case ErrorCode::DuplicateSiteId:
      return "DuplicateSiteId";
    case ErrorCode::EmptyPanel:
      return "EmptyPanel";
    case ErrorCode::BadSplit:
      return "BadSplit";
    case ErrorCode::InvalidSpec:
      return "InvalidSpec";
    case ErrorCode::Io:
      return "Io";
    case ErrorCode::LengthMismatch:
      return "LengthMismatch";
    case ErrorCode::TooFewSamples:
      return "TooFewSamples";
    case ErrorCode::ZeroVariance:
      return "ZeroVariance";
    case ErrorCode::UnknownSite:
      return "UnknownSite";
    case ErrorCode::PanelTooShort:
      return "PanelTooShort";
    case ErrorCode::NotEnoughCandidates:
      return "NotEnoughCandidates";
    case ErrorCode::InvalidConfig:
      return "InvalidConfig";
    case ErrorCode::ZeroVarianceColumn:
      return "ZeroVarianceColumn";
    case ErrorCode::DegenerateFit:
      return "DegenerateFit";
    case ErrorCode::DimensionMismatch:
      return "DimensionMismatch";
    case ErrorCode::NonFiniteInput:
      return "NonFiniteInput";
    case ErrorCode::BadModel:
      return "BadModel";
    case ErrorCode::SingularBlock:
      return "SingularBlock";
    case ErrorCode::InsufficientHistory:
      return "InsufficientHistory";
    case ErrorCode::OutOfRange:
      return "OutOfRange";
    case ErrorCode::Empty:
      return "Empty";
  }
  return "Unknown";
}

}  // namespace stbn
