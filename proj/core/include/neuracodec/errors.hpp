#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace neuracodec {

// Base for every error caused by bad input data or configuration. The CLI
// maps these to exit code 2; anything else escaping is an internal error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class KeyParseError : public Error {
 public:
  KeyParseError(std::size_t position, const std::string& what)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Truncated or corrupt binary payloads; offset is where decoding stopped.
class DecodeError : public FormatError {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : FormatError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace neuracodec
