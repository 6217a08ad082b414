// Copyright 2026 The CDI Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CDI_ERROR_H_
#define CDI_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdi {

// Base class for every domain error raised by the library. The CLI maps
// these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable or malformed image file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Mismatched image / band / pyramid dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented domain.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Syntax error in a degradation spec; offset is a byte offset into the text.
class ParseError : public Error {
 public:
  ParseError(size_t offset, const std::string& message)
      : Error("at offset " + std::to_string(offset) + ": " + message),
        offset_(offset),
        message_(message) {}

  size_t offset() const { return offset_; }
  const std::string& message() const { return message_; }

 private:
  size_t offset_;
  std::string message_;
};

// JSON document that does not follow its schema. pointer is an RFC 6901
// JSON pointer to the offending location.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& pointer, const std::string& message)
      : Error(pointer + ": " + message), pointer_(pointer) {}

  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

// A lookup (trial, prediction, ...) that has no entry.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdi

#endif  // CDI_ERROR_H_
