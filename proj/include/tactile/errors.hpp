#pragma once

#include <stdexcept>
#include <string>

namespace tactile {

/// Base of every error raised by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input outside the documented domain of an operation (pose ranges etc).
class DomainError : public Error { using Error::Error; };
/// Tensor or vector dimensions do not line up.
class ShapeError : public Error { using Error::Error; };
/// Invalid configuration value (negative weights, empty bands, bad bins).
class ConfigError : public Error { using Error::Error; };
/// Malformed or truncated file.
class FormatError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
/// Dataset content problems: empty split, unpaired samples.
class DataError : public Error { using Error::Error; };
/// Dataset was produced by a different plant configuration.
class IntegrityError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
/// API used out of order, e.g. backward with a stale forward cache.
class UsageError : public Error { using Error::Error; };
/// Position beyond the gripper travel.
class RangeError : public Error { using Error::Error; };
/// Reference force above what the plant can produce.
class InfeasibleReference : public Error { using Error::Error; };
/// Metric is not defined for the input (constant truth for R^2).
class UndefinedMetric : public Error { using Error::Error; };

} // namespace tactile
