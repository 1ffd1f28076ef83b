#pragma once

#include <stdexcept>
#include <string>

namespace fedshard {

// Base error for everything the library throws on misuse or bad data.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised on malformed or inconsistent configuration / file contents.
// The CLI maps this class to exit code 2, everything else to 1.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace fedshard
