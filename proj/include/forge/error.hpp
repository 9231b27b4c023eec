#pragma once

#include <stdexcept>
#include <string>

namespace forge {

/// Base class for every error the toolkit raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A dataset manifest references something that does not exist.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Input data violates an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed on a specific item.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string item, const std::string& what)
      : Error("stage '" + stage + "' failed on '" + item + "': " + what),
        stage_(std::move(stage)),
        item_(std::move(item)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& item() const noexcept { return item_; }

 private:
  std::string stage_;
  std::string item_;
};

}  // namespace forge
