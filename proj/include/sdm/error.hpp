#pragma once

#include <stdexcept>
#include <string>

namespace sdm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON, mesh files, checkpoints).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A well-formed value that violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument to an operation (bad face id, unknown feature type, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometry (zero-length segment, zero-area triangle, zero extent).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint and configuration shape disagreements.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Remote provider failures (transport, timeout, unusable response).
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Edits that cannot be applied (e.g. deleting every face).
class EditError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdm
