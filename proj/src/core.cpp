#include "shockforge/core.hpp"

namespace shockforge {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonStrictHyperbolicity: return "NonStrictHyperbolicity";
    case ErrorKind::OutOfBox: return "OutOfBox";
    case ErrorKind::SingularConstruction: return "SingularConstruction";
    case ErrorKind::NoBlowup: return "NoBlowup";
    case ErrorKind::DegenerateMinimum: return "DegenerateMinimum";
    case ErrorKind::EarlyCrossing: return "EarlyCrossing";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::BoundaryDataGap: return "BoundaryDataGap";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::NoCrossing: return "NoCrossing";
    case ErrorKind::DegenerateCusp: return "DegenerateCusp";
    case ErrorKind::BranchLoss: return "BranchLoss";
    case ErrorKind::LeftCuspInterior: return "LeftCuspInterior";
    case ErrorKind::NewtonDivergence: return "NewtonDivergence";
    case ErrorKind::EntropyViolation: return "EntropyViolation";
    case ErrorKind::FootOutOfDomain: return "FootOutOfDomain";
    case ErrorKind::NoContraction: return "NoContraction";
    case ErrorKind::InsufficientJump: return "InsufficientJump";
    case ErrorKind::InsufficientRange: return "InsufficientRange";
    case ErrorKind::CFLViolation: return "CFLViolation";
    case ErrorKind::IncompletePipeline: return "IncompletePipeline";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace shockforge
