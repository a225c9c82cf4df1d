#pragma once

#include <stdexcept>
#include <string>

namespace ndem {

/// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A footprint, foot or trajectory left the bounds of a grid.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

/// A terrain feature could not be placed in the requested extent.
class PlacementError : public Error {
 public:
  PlacementError(std::string feature, const std::string& what)
      : Error(what), feature_(std::move(feature)) {}
  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

/// An operation received an input outside its mathematical domain
/// (empty region, all-masked metric, fully empty map, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or otherwise corrupt numeric data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Two grids that must share a GridSpec do not.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or spec file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file or wire frame.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// The reconstruction endpoint could not be reached or failed mid-request.
class EndpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace ndem
