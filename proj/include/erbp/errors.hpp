#pragma once

#include <stdexcept>
#include <string>

namespace erbp {

enum class Errc {
  NegativeWeight,
  ZeroSum,
  NonFinite,
  NotNormalized,
  DimMismatch,
  LambdaOutOfRange,
  DeltaOutOfRange,
  BoundaryEvaluation,
  SupportViolation,
  Infeasible,
  NotConverged,
  ReservoirInvalid,
  MissingCheckpoints,
  InsufficientTrials,
  GeneratorUnsupported,
  InvalidArgument,
};

inline const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NegativeWeight: return "NegativeWeight";
    case Errc::ZeroSum: return "ZeroSum";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::LambdaOutOfRange: return "LambdaOutOfRange";
    case Errc::DeltaOutOfRange: return "DeltaOutOfRange";
    case Errc::BoundaryEvaluation: return "BoundaryEvaluation";
    case Errc::SupportViolation: return "SupportViolation";
    case Errc::Infeasible: return "Infeasible";
    case Errc::NotConverged: return "NotConverged";
    case Errc::ReservoirInvalid: return "ReservoirInvalid";
    case Errc::MissingCheckpoints: return "MissingCheckpoints";
    case Errc::InsufficientTrials: return "InsufficientTrials";
    case Errc::GeneratorUnsupported: return "GeneratorUnsupported";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// message names the offending index, value, or clause.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace erbp
