#pragma once

#include <stdexcept>
#include <string>

namespace dropspread {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input spatial size incompatible with the network pyramid.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, int required_divisor)
      : Error(what), required_divisor_(required_divisor) {}
  int required_divisor() const { return required_divisor_; }

 private:
  int required_divisor_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or config with an unknown format tag / version, or corrupt contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class NoIntersectionError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// External frame decoder not found on the host.
class DecoderUnavailable : public Error {
 public:
  using Error::Error;
};

}  // namespace dropspread
