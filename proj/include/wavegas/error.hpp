#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace wavegas {

// Shape mismatches, invalid indices, bad configuration. Not recoverable by the
// caller; the CLI maps it to a usage/config failure.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dataset directory could not be read or is inconsistent.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
  throw ConfigError(concat(std::forward<Args>(args)...));
}

template <typename... Args>
void require(bool ok, Args&&... args) {
  if (!ok) fail(std::forward<Args>(args)...);
}

}  // namespace detail
}  // namespace wavegas
