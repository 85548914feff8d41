#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bikepose {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point at or behind the camera plane was projected.
class BehindCameraError : public Error {
 public:
  BehindCameraError(const std::string& what, int keypoint = -1)
      : Error(what), keypoint_(keypoint) {}

  /// Offending keypoint index, or -1 when the point was not a keypoint.
  int keypoint() const { return keypoint_; }

 private:
  int keypoint_;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed record, template or config document.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnderConstrainedError : public Error {
 public:
  using Error::Error;
};

class RetryBudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace bikepose
