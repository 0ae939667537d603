#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace shockforge {

constexpr int kMaxDim = 8;

// Small fixed-capacity types: no heap traffic for n <= kMaxDim.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxDim>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

enum class ErrorKind {
  NonStrictHyperbolicity,
  OutOfBox,
  SingularConstruction,
  NoBlowup,
  DegenerateMinimum,
  EarlyCrossing,
  StepFailure,
  BoundaryDataGap,
  OutOfDomain,
  NoCrossing,
  DegenerateCusp,
  BranchLoss,
  LeftCuspInterior,
  NewtonDivergence,
  EntropyViolation,
  FootOutOfDomain,
  NoContraction,
  InsufficientJump,
  InsufficientRange,
  CFLViolation,
  IncompletePipeline,
  Config,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Vec zeros(int n) { return Vec::Zero(n); }

}  // namespace shockforge
