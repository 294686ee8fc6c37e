#pragma once

#include <stdexcept>
#include <string>

namespace pgmc {

// Invalid pipeline/graph configuration; message carries the offending location.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Shape/length mismatch between messages or states.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Caller handed in values that violate an operation's preconditions.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed on-disk data (IDX files, checkpoints, corpus files).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pgmc
