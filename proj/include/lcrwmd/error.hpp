#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lcrwmd {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between operands (column counts, vocabulary sizes, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Embedding or index file could not be parsed.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A document could not be turned into a histogram.
class IngestError : public Error {
 public:
  IngestError(std::size_t document, const std::string& what)
      : Error("document " + std::to_string(document) + ": " + what),
        document_(document) {}

  std::size_t document() const noexcept { return document_; }

 private:
  std::size_t document_;
};

/// Inputs violate an invariant the operation relies on.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_dims(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace detail
}  // namespace lcrwmd
