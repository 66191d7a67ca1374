#pragma once

#include <stdexcept>
#include <string>

namespace coverify {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or missing configuration: toolchain not found, invalid endpoint
/// settings, unreadable config file. The CLI maps these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A record or text could not be parsed. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// The parser recognised the construct but refuses to handle it
/// (function pointers, templates, variadics).
class UnsupportedSignature : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Model output did not contain the expected payload.
class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& what, std::string raw = {})
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Endpoint failed after exhausting the retry budget.
class EndpointError : public Error {
 public:
  using Error::Error;
};

/// Harness generation rejected the inputs.
class HarnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace coverify
