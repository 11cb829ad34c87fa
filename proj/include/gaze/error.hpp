#pragma once

#include <stdexcept>
#include <string>

namespace gaze {

// Error taxonomy. The CLI maps these onto exit codes:
//   IoError/ArgumentError -> 2, ParseError/UnsupportedError/ShapeError -> 3,
//   DivergenceError -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A file or stream could not be opened or read.
struct IoError : Error {
  using Error::Error;
};

// Input bytes/text do not conform to the expected format.
struct ParseError : Error {
  using Error::Error;
};

// The format is recognized but uses a variant this library refuses to run
// (tilted Haar features, non-stump trees, unknown feature types, ...).
struct UnsupportedError : ParseError {
  using ParseError::ParseError;
};

// Rectangle or coordinate outside the image.
struct BoundsError : Error {
  using Error::Error;
};

// Caller-supplied argument violates a precondition.
struct ArgumentError : Error {
  using Error::Error;
};

// Tensor or serialized-weight shapes do not match the network spec.
struct ShapeError : Error {
  using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace gaze
