#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace srcnpat {

// Base of every error thrown by the library. `kind()` is a short stable
// token the CLI prints in its machine-parseable error line.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

class DimensionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "dimension"; }
};

class GeometryError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "geometry"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

// Malformed binary input. Carries the byte offset at which decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }
  const char* kind() const noexcept override { return "format"; }

 private:
  std::size_t offset_;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  explicit SolverError(const std::string& what) : Error(what), step_(0) {}
  std::size_t step() const noexcept { return step_; }
  const char* kind() const noexcept override { return "solver"; }

 private:
  std::size_t step_;
};

class TrainingError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "training"; }
};

class ArchitectureError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "architecture"; }
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }
  const char* kind() const noexcept override { return "config"; }

 private:
  std::string key_;
};

}  // namespace srcnpat
