#include "dsmreg/errors.h"

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace dsmreg {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kSingularTransform: return "SingularTransform";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kNoOverlap: return "NoOverlap";
    case ErrorCode::kAllNodata: return "AllNodata";
    case ErrorCode::kNoValidPixels: return "NoValidPixels";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kDegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::kTooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::kNotEnoughDsms: return "NotEnoughDsms";
    case ErrorCode::kDisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kEmptyResult: return "EmptyResult";
    case ErrorCode::kNoInliers: return "NoInliers";
    case ErrorCode::kNoOverlappingPairs: return "NoOverlappingPairs";
  }
  return "Unknown";
}

DsmError::DsmError(ErrorCode code, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", error_code_name(code), message)),
      code_(code) {}

ParseError::ParseError(const std::string& path, std::size_t line,
                       std::size_t byte_offset, const std::string& what)
    : DsmError(ErrorCode::kParseError,
               fmt::format("{}:{} (byte {}): {}", path, line, byte_offset, what)),
      line_(line),
      byte_offset_(byte_offset) {}

namespace {

std::string describe_components(const std::vector<std::vector<int>>& components) {
  std::string out = fmt::format("{} components:", components.size());
  for (const auto& c : components) out += fmt::format(" [{}]", fmt::join(c, ","));
  return out;
}

}  // namespace

DisconnectedGraphError::DisconnectedGraphError(std::vector<std::vector<int>> components)
    : DsmError(ErrorCode::kDisconnectedGraph, describe_components(components)),
      components_(std::move(components)) {}

}  // namespace dsmreg
