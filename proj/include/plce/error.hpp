// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace plce {

// Root of all library errors. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape or dimension contract violated.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced or consumed by a kernel.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Weight file, configuration, or stage-index problems.
class ModelError : public Error {
 public:
  using Error::Error;
};

// WAV container problems and degenerate (silent) audio.
class AudioError : public Error {
 public:
  using Error::Error;
};

// Manifests, datasets and test sets.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace plce
