#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vscan {

enum class ErrorKind {
  kShape,
  kBudget,
  kDegenerateInput,
  kFormat,
  kTrace,
  kLayout,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Base of every error the library throws. The CLI maps kinds to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kShape, what) {}
};

class BudgetError : public Error {
 public:
  explicit BudgetError(const std::string& what) : Error(ErrorKind::kBudget, what) {}
};

class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& what)
      : Error(ErrorKind::kDegenerateInput, what) {}
};

class TraceError : public Error {
 public:
  explicit TraceError(const std::string& what) : Error(ErrorKind::kTrace, what) {}
};

class LayoutError : public Error {
 public:
  explicit LayoutError(const std::string& what) : Error(ErrorKind::kLayout, what) {}
};

// Invalid or inconsistent configuration. `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(ErrorKind::kConfig, field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

// Malformed TensorFile. `offset` is the byte position where decoding failed.
class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& detail)
      : Error(ErrorKind::kFormat,
              "format error at byte offset " + std::to_string(offset) + ": " + detail),
        offset_(offset),
        detail_(detail) {}

  std::uint64_t offset() const noexcept { return offset_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::uint64_t offset_;
  std::string detail_;
};

}  // namespace vscan
