/*
 * Copyright 2026 The nngp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace nngp {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, inconsistent shapes or bad arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Numerical failure: PSD violation, exhausted regularization ladder,
/// spatial collapse under valid padding.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SpatialCollapseError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class LadderExhaustedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// File-system and file-format errors.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nngp
