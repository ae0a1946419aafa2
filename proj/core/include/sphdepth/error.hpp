/*
 * Copyright (c) 2026, the spheredepth authors.
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

namespace sphdepth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar argument (nside, raster size, offset, ...) is out of its domain.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not agree (rows, channels, grid level).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the mathematical domain of an operation (log of a
/// nonpositive depth, non-finite input).
class DomainError : public Error {
 public:
  using Error::Error;
};

class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// A required precomputed artifact is missing or does not match.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class InvalidScene : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sphdepth
