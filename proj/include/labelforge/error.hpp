#pragma once

#include <stdexcept>
#include <string>

namespace labelforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad LF file, bad CSV/JSONL line, invalid rule.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A referenced file does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Artifacts produced from different LF sets were mixed.
class VersionMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace labelforge
