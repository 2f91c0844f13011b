#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vp3d {

// Base for recoverable domain errors. Precondition violations use the
// standard std::invalid_argument / std::out_of_range instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BehindCameraError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error("parse error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class AddressError : public Error {
 public:
  using Error::Error;
};

class NoThresholdError : public Error {
 public:
  using Error::Error;
};

class SimulationIntegrityError : public Error {
 public:
  using Error::Error;
};

class OffVesselError : public Error {
 public:
  using Error::Error;
};

class OffPathError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vp3d
