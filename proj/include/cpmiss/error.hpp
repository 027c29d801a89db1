#pragma once

#include <stdexcept>
#include <string>

namespace cpmiss {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A sample's mask does not precede the requested target mask.
class MaskOrderError : public Error {
public:
    using Error::Error;
};

class EmptyDistributionError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Invalid user-supplied configuration (bad parameter values, non-PD covariance, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Amputation intercept search failed to hit the requested missing rate.
class CalibrationError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent data (missing responses, schema mismatch, ...).
class DataError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// A requested test group has (numerically) zero probability under the mechanism.
class UnreachableGroupError : public Error {
public:
    using Error::Error;
};

} // namespace cpmiss
