// Copyright 2026 The idk-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace idk {

// Base of everything the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, bad config, violated preconditions. CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A malformed input line. Carries the 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : ValidationError(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// Remote endpoint rejected our credentials; the whole run must stop.
class AuthError : public Error {
 public:
  using Error::Error;
};

// Retryable failure (connection reset, 5xx, 429, timeouts).
class TransientError : public Error {
 public:
  using Error::Error;
};

}  // namespace idk
