#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rsk {

/// Invalid argument or malformed user input. CLI exit code 2.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Two sketches whose specs do not allow cell-wise combination.
class IncompatibleSketchError : public InputError {
public:
  using InputError::InputError;
};

/// Malformed serialized artifact. Carries the byte offset of the first
/// offending byte. CLI exit code 3.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& message, std::size_t offset)
      : std::runtime_error(message + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Training produced a non-finite loss. Carries the epoch index.
class TrainingError : public std::runtime_error {
public:
  TrainingError(const std::string& message, std::uint32_t epoch)
      : std::runtime_error(message + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}

  std::uint32_t epoch() const noexcept { return epoch_; }

private:
  std::uint32_t epoch_;
};

/// Unusable configuration value.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace rsk
