#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace seqvpr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operands with incompatible dimensions or lengths.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration values (margins, rates, counts).
class ConfigError : public Error {
public:
  using Error::Error;
};

enum class LoadErrorKind {
  kIo,
  kHeader,
  kTruncated,
  kDimension,
  kNonFinite,
  kFormat,
};

inline const char* to_string(LoadErrorKind kind) {
  switch (kind) {
    case LoadErrorKind::kIo: return "io";
    case LoadErrorKind::kHeader: return "header";
    case LoadErrorKind::kTruncated: return "truncated";
    case LoadErrorKind::kDimension: return "dimension";
    case LoadErrorKind::kNonFinite: return "non_finite";
    case LoadErrorKind::kFormat: return "format";
  }
  return "unknown";
}

/// Raised while decoding a feature file, checkpoint, index or manifest.
/// `offset` is the byte offset of the offending field, `record` the record
/// index when the failure is inside a record (or npos).
class LoadError : public Error {
public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  LoadError(LoadErrorKind kind, const std::string& what, std::uint64_t offset = 0,
            std::size_t record = npos)
      : Error(std::string("load error (") + to_string(kind) + ") at byte " +
              std::to_string(offset) +
              (record == npos ? std::string() : " record " + std::to_string(record)) + ": " +
              what),
        kind_(kind), offset_(offset), record_(record) {}

  LoadErrorKind kind() const noexcept { return kind_; }
  std::uint64_t offset() const noexcept { return offset_; }
  std::size_t record() const noexcept { return record_; }

private:
  LoadErrorKind kind_;
  std::uint64_t offset_;
  std::size_t record_;
};

/// The triplet sampler could not find a valid positive or negative.
class SamplingExhausted : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
  explicit DivergenceError(std::size_t step)
      : Error("non-finite loss at training step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

/// No feasible sequence-matching line exists, or an index is empty.
class NoMatchError : public Error {
public:
  using Error::Error;
};

}  // namespace seqvpr
