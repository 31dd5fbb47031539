#pragma once

#include <stdexcept>
#include <string>

namespace citeaudit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network or provider failure that may succeed on retry.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  int status() const noexcept { return status_; }
  bool rate_limited() const noexcept { return status_ == 429; }

 private:
  int status_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace citeaudit
