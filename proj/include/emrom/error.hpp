// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emrom
{

// Failure categories surfaced by the library. Every throw site carries one of these so
// callers (and the CLI) can branch on the kind without parsing messages.
enum class ErrorKind
{
  NotSymmetric,
  NotSPD,
  Singular,
  RankTooLarge,
  NonPositiveSpectrum,
  Breakdown,
  InvalidDimension,
  RegionOutsideDomain,
  NonSPDContrast,
  CFLViolation,
  NonFiniteField,
  TooLarge,
  SubdomainTooSmall,
  LengthMismatch,
  UndersampledInput,
  InsufficientData,
  DimensionMismatch,
  PointOutsideBasis,
  MissingGreens,
  EmptyRegion,
  DegenerateGamma,
  ForwardFailure,
  FactorizationFailure,
  SingularSystem,
  NonConvergence,
  ParseError,
  ValidationError,
  MissingArtifact,
  IOError
};

constexpr std::string_view to_string(ErrorKind kind)
{
  switch (kind)
  {
    case ErrorKind::NotSymmetric:
      return "NotSymmetric";
    case ErrorKind::NotSPD:
      return "NotSPD";
    case ErrorKind::Singular:
      return "Singular";
    case ErrorKind::RankTooLarge:
      return "RankTooLarge";
    case ErrorKind::NonPositiveSpectrum:
      return "NonPositiveSpectrum";
    case ErrorKind::Breakdown:
      return "Breakdown";
    case ErrorKind::InvalidDimension:
      return "InvalidDimension";
    case ErrorKind::RegionOutsideDomain:
      return "RegionOutsideDomain";
    case ErrorKind::NonSPDContrast:
      return "NonSPDContrast";
    case ErrorKind::CFLViolation:
      return "CFLViolation";
    case ErrorKind::NonFiniteField:
      return "NonFiniteField";
    case ErrorKind::TooLarge:
      return "TooLarge";
    case ErrorKind::SubdomainTooSmall:
      return "SubdomainTooSmall";
    case ErrorKind::LengthMismatch:
      return "LengthMismatch";
    case ErrorKind::UndersampledInput:
      return "UndersampledInput";
    case ErrorKind::InsufficientData:
      return "InsufficientData";
    case ErrorKind::DimensionMismatch:
      return "DimensionMismatch";
    case ErrorKind::PointOutsideBasis:
      return "PointOutsideBasis";
    case ErrorKind::MissingGreens:
      return "MissingGreens";
    case ErrorKind::EmptyRegion:
      return "EmptyRegion";
    case ErrorKind::DegenerateGamma:
      return "DegenerateGamma";
    case ErrorKind::ForwardFailure:
      return "ForwardFailure";
    case ErrorKind::FactorizationFailure:
      return "FactorizationFailure";
    case ErrorKind::SingularSystem:
      return "SingularSystem";
    case ErrorKind::NonConvergence:
      return "NonConvergence";
    case ErrorKind::ParseError:
      return "ParseError";
    case ErrorKind::ValidationError:
      return "ValidationError";
    case ErrorKind::MissingArtifact:
      return "MissingArtifact";
    case ErrorKind::IOError:
      return "IOError";
  }
  return "Unknown";
}

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string &what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what)
  {
  }

  ErrorKind kind() const noexcept { return kind_; }

  // Message without the kind prefix.
  const std::string &detail() const noexcept { return detail_; }

private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace emrom
