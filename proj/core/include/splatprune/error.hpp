#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace splatprune {

enum class ErrorKind {
  InvalidParameter,
  InvalidState,
  Io,
  MalformedHeader,
  SchemaMismatch,
  TruncatedBody,
  DatasetEmpty,
  DimensionMismatch,
  EmptyScene,
  Diverged,
};

const char* to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind lets
/// callers (and tests) distinguish failure classes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// PLY parse failure located at a byte offset into the file.
class PlyError : public Error {
 public:
  PlyError(ErrorKind kind, std::uint64_t offset, const std::string& what)
      : Error(kind, what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Raised when the training loss becomes non-finite.
class DivergedError : public Error {
 public:
  DivergedError(long iteration, double loss)
      : Error(ErrorKind::Diverged,
              "training diverged at iteration " + std::to_string(iteration) +
                  " (loss=" + std::to_string(loss) + ")"),
        iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const char* what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace splatprune
