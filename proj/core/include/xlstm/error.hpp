// Copyright 2026 The xlstm-cpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xlstm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An activation produced a non-finite value (exp overflow).
class NumericOverflowError : public Error {
 public:
  NumericOverflowError(const std::string& what, std::size_t index)
      : Error(what + " (flat index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// A recurrent state or intermediate became NaN/inf.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::string component, std::size_t timestep)
      : Error("non-finite " + component + " at timestep " + std::to_string(timestep)),
        component_(std::move(component)),
        timestep_(timestep) {}
  const std::string& component() const noexcept { return component_; }
  std::size_t timestep() const noexcept { return timestep_; }

 private:
  std::string component_;
  std::size_t timestep_;
};

/// A backward pass received a cache that does not belong to the given params.
class CacheMismatchError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message)
      : Error(key.empty() ? message : "config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Unreadable, truncated or mismatched checkpoint and data files.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace xlstm
