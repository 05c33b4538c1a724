// Copyright 2026 The Flatsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace flatsim {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values: non-finite entries, empty inputs, zero total weight.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Dimension or length mismatch between values that must be composable.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration; messages carry the offending field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Enclave operation called in a phase that does not permit it.
class LifecycleError : public Error {
 public:
  using Error::Error;
};

// Malformed or unusable key material.
class KeyError : public Error {
 public:
  using Error::Error;
};

// Authenticated decryption failed: the envelope was modified in transit.
class TamperError : public Error {
 public:
  using Error::Error;
};

// Authentic update whose round does not match the round being aggregated.
class StaleUpdateError : public Error {
 public:
  using Error::Error;
};

// Operation the security model forbids outright, e.g. exporting a secret key.
class ForbiddenError : public Error {
 public:
  using Error::Error;
};

// Aggregation could not run (empty selection).
class AggregationError : public Error {
 public:
  using Error::Error;
};

// Fewer submissions than the configured minimum number of participants.
class QuorumError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized bytes, config text, or metrics records.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures while reading or writing experiment artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace flatsim
