#pragma once

#include <stdexcept>
#include <string>

namespace mixlearn {

/// Caller supplied something outside an operation's contract.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// An iteration or solver failed to reach the accuracy it promises.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Spike matching across projection directions did not yield bijections.
class MatchingError : public std::runtime_error {
 public:
  explicit MatchingError(const std::string& what) : std::runtime_error(what) {}
};

/// Reading or writing a file failed.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mixlearn
