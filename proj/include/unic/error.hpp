// Copyright 2026 The UnicKit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace unic {

/// Base class for all unic-kit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates its domain (non-positive box size, score out of range...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Dimensions of two related objects do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A container cannot hold what the caller asked for (n < |gt| when padding).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite intermediate values or other numeric breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (head count not dividing d_model, bad ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file does not match its documented schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A record refers to an id that does not exist.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

/// An evaluation precondition failed (too few predictions, empty input...).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Sample generation gave up (no admissible placement within max_attempts).
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace unic
