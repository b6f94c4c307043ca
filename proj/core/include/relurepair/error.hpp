/* Copyright 2026 The relurepair Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace relurepair {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or index mismatch between a model, an input and a layer.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed model, dataset or configuration file.
class LoadError : public Error {
 public:
  enum class Kind {
    kIo,
    kBadMagic,
    kTruncated,
    kCountMismatch,
    kRaggedRow,
    kNonNumeric,
    kOutOfRange,
    kSchema,
  };

  LoadError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// A structural invariant was broken (overlapping deltas, duplicate experts, ...).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Simplex breakdown: iteration cap, unbounded pivot column or lost feasibility.
// Never used to signal an infeasible system.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace relurepair
