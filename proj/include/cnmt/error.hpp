#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cnmt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Too few observations, collinear regressors, or zero-variance targets.
class DegenerateDesign : public Error {
 public:
  using Error::Error;
};

// Pre-filtering rejected every length pair.
class AllFiltered : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t row, const std::string& reason)
      : Error(source + ":" + std::to_string(row) + ": " + reason),
        source_(std::move(source)),
        row_(row) {}

  const std::string& source() const noexcept { return source_; }
  /// 1-based line number within the file; the header is line 1.
  std::size_t row() const noexcept { return row_; }

 private:
  std::string source_;
  std::size_t row_;
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

class EmptyFile : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class CloudUnreachable : public Error {
 public:
  using Error::Error;
};

}  // namespace cnmt
