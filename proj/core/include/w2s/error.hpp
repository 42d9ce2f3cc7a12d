#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace w2s {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric precondition failed (zero norm, non-finite entry, tau <= 0, ...).
/// `index()` names the offending row/sample when there is one.
class DomainError : public Error {
 public:
  static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

  explicit DomainError(const std::string& what, std::size_t index = kNoIndex)
      : Error(what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid or mutually incompatible configuration, detected before compute.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked out of order (e.g. holdout split before test split).
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& what, std::string path)
      : Error(what + ": " + path), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

enum class ParseFailure {
  kBadMagic,
  kBadVersion,
  kTruncated,
  kTrailingBytes,
  kBadFooter,
  kLabelOutOfRange,
};

const char* to_string(ParseFailure failure) noexcept;

/// Malformed W2SM/W2SL file. Each corruption class has its own `failure()`.
class ParseError : public Error {
 public:
  ParseError(ParseFailure failure, const std::string& detail)
      : Error(std::string(to_string(failure)) + ": " + detail),
        failure_(failure),
        detail_(detail) {}

  ParseFailure failure() const noexcept { return failure_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ParseFailure failure_;
  std::string detail_;
};

}  // namespace w2s
