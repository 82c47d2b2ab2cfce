#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsmreg {

enum class ErrorCode {
  kInvalidArgument,
  kIoError,
  kParseError,
  kUnsupportedFormat,
  kSingularTransform,
  kOutOfBounds,
  kNoOverlap,
  kAllNodata,
  kNoValidPixels,
  kDegenerateGeometry,
  kDegenerateMatrix,
  kTooFewCorrespondences,
  kNotEnoughDsms,
  kDisconnectedGraph,
  kNumericalFailure,
  kEmptyResult,
  kNoInliers,
  kNoOverlappingPairs,
};

std::string_view error_code_name(ErrorCode code);

// Base exception for every failure raised by the library. The code lets
// callers (notably the CLI) map failures onto exit statuses.
class DsmError : public std::runtime_error {
 public:
  DsmError(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public DsmError {
 public:
  ParseError(const std::string& path, std::size_t line, std::size_t byte_offset,
             const std::string& what);

  std::size_t line() const noexcept { return line_; }
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t line_;
  std::size_t byte_offset_;
};

class DisconnectedGraphError : public DsmError {
 public:
  explicit DisconnectedGraphError(std::vector<std::vector<int>> components);

  const std::vector<std::vector<int>>& components() const noexcept {
    return components_;
  }

 private:
  std::vector<std::vector<int>> components_;
};

}  // namespace dsmreg
