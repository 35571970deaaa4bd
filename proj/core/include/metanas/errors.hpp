#pragma once

#include <stdexcept>
#include <string>

namespace metanas {

// Base class for all library errors so the CLI can map them to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor/op shape contract violated. Message names the op and both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A forward op produced NaN/Inf, or a gradient/parameter went non-finite.
class NumericFault : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (CLI config file, builder args, unknown keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File format problems: bad magic, version mismatch, truncation.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace metanas
