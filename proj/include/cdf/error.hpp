#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Cholesky failed; pivot() is the zero-based index of the first non-positive pivot.
class FactorizationError : public Error {
 public:
  FactorizationError(std::size_t pivot, const std::string& what_arg)
      : Error(what_arg), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class ShardShapeError : public Error {
 public:
  using Error::Error;
};

// A surrogate statistic became non-finite after an update.
class NumericOverflowError : public Error {
 public:
  NumericOverflowError(std::string stat_id, const std::string& what_arg)
      : Error(what_arg), stat_id_(std::move(stat_id)) {}
  const std::string& stat_id() const noexcept { return stat_id_; }

 private:
  std::string stat_id_;
};

class InvalidStateError : public Error {
 public:
  using Error::Error;
};

// Conditional became improper, e.g. a non-positive inverse-gamma rate.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// Wraps any failure inside a stream with the 1-based shard index.
class StreamError : public Error {
 public:
  StreamError(std::size_t shard_index, const std::string& what_arg)
      : Error(what_arg), shard_index_(shard_index) {}
  std::size_t shard_index() const noexcept { return shard_index_; }

 private:
  std::size_t shard_index_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what_arg)
      : Error("line " + std::to_string(line) + ": " + what_arg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NewLevelError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdf
