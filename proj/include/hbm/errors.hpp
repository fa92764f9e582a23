// Copyright 2026 The HBM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hbm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative solver exhausted its iteration budget.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Too few stacked samples to identify a gain.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// A gain violates rho(A + B K) < 1.
class NotStabilizing : public Error {
 public:
  using Error::Error;
};

/// The interior-point solver stalled or lost feasibility.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace internal {

[[noreturn]] inline void ThrowDimension(const std::string& what) {
  throw DimensionMismatch(what);
}

}  // namespace internal

}  // namespace hbm
