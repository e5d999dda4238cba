#pragma once

#include <stdexcept>
#include <string>

namespace mov3d {

// Every error the library raises derives from Error so callers can map the
// category onto a process exit code without string matching.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
    virtual const char* category() const noexcept { return "error"; }
};

// Tensor extents disagree with what an operation requires.
class DimensionError : public Error {
  public:
    using Error::Error;
    const char* category() const noexcept override { return "dimension"; }
};

// A value violates a documented precondition (range, enum, Nyquist...).
class ValidationError : public Error {
  public:
    using Error::Error;
    const char* category() const noexcept override { return "validation"; }
};

// Layer or pipeline configuration cannot produce a valid result.
class ConfigurationError : public Error {
  public:
    using Error::Error;
    const char* category() const noexcept override { return "configuration"; }
};

// API misuse, e.g. backward() on a tensor that was never recorded.
class UsageError : public Error {
  public:
    using Error::Error;
    const char* category() const noexcept override { return "usage"; }
};

// Binary container is malformed: bad magic, truncated, inconsistent sizes.
class FormatError : public Error {
  public:
    using Error::Error;
    const char* category() const noexcept override { return "format"; }
};

class IoError : public Error {
  public:
    using Error::Error;
    const char* category() const noexcept override { return "io"; }
};

// Training produced a non-finite loss.
class NumericError : public Error {
  public:
    using Error::Error;
    const char* category() const noexcept override { return "numeric"; }
};

// key=value config file problems; carries the 1-based line number (0 when
// the problem is not tied to a line, e.g. a missing required key).
class ConfigParseError : public Error {
  public:
    ConfigParseError(const std::string& message, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
    int line() const noexcept { return line_; }
    const char* category() const noexcept override { return "config"; }

  private:
    int line_;
};

// A pipeline stage was asked to run before its inputs exist.
class MissingPrerequisite : public Error {
  public:
    using Error::Error;
    const char* category() const noexcept override { return "prerequisite"; }
};

}  // namespace mov3d
