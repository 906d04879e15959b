#pragma once

#include <stdexcept>
#include <string>

namespace hs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files or arguments (CLI exit code 2).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A sampled derivative bound or a profile constraint could not be certified
/// (CLI exit code 3).
class CertificationError : public Error {
 public:
  using Error::Error;
};

/// A pipeline step failed; carries the 1-based step index (CLI exit code 4).
class StepError : public Error {
 public:
  StepError(int step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace hs
