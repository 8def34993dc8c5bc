#include "fracbench/error.hpp"

namespace fracbench {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::EmptySurface: return "EmptySurface";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NoGroundTruth: return "NoGroundTruth";
    case ErrorCode::CaseAlignmentError: return "CaseAlignmentError";
    case ErrorCode::InsufficientTeams: return "InsufficientTeams";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateTest: return "DegenerateTest";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EnergyRangeError: return "EnergyRangeError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fracbench
