#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qus {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A distribution or estimator parameter lies outside its domain.
class ParameterDomainError : public Error {
 public:
  using Error::Error;
};

/// Numerical quadrature did not reach the requested tolerance within budget.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Input carries no usable information (constant data, zero variance).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// A reduction was asked to run over zero included elements.
class EmptyDomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

/// Invalid combination of user-supplied settings.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// A map file or manifest violates its format; field() names the violated part.
class MalformedFileError : public Error {
 public:
  MalformedFileError(std::string path, std::string field, const std::string& detail)
      : Error(path + ": malformed " + field + ": " + detail),
        path_(std::move(path)),
        field_(std::move(field)) {}
  const std::string& path() const noexcept { return path_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string path_;
  std::string field_;
};

class IoError : public Error {
 public:
  IoError(std::string path, const std::string& detail)
      : Error(path + ": " + detail), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace qus
