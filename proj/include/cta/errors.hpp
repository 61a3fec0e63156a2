#ifndef CTA_ERRORS_HPP_
#define CTA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cta {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an operation's precondition (bad index, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or missing files.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered during training or gradient checking.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cta

#endif  // CTA_ERRORS_HPP_
