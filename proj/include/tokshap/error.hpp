#pragma once

#include <stdexcept>
#include <string>

namespace tokshap {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed, truncated or version-mismatched binary file.
class FormatError : public Error {
public:
  using Error::Error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

/// Failure inside an embedding provider.
class ProviderError : public Error {
public:
  using Error::Error;
};

class MissingText : public ProviderError {
public:
  explicit MissingText(std::string text)
      : ProviderError("no embedding for text: \"" + text + "\""), text_(std::move(text)) {}
  const std::string& text() const noexcept { return text_; }

private:
  std::string text_;
};

class TransportError : public ProviderError {
public:
  using ProviderError::ProviderError;
};

class ProtocolError : public ProviderError {
public:
  using ProviderError::ProviderError;
};

class DuplicateText : public Error {
public:
  using Error::Error;
};

/// Brute-force enumeration refused for oversized games.
class TooLarge : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class InsufficientData : public Error {
public:
  using Error::Error;
};

/// Caller passed arguments outside an operation's domain.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

}  // namespace tokshap
