#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace cofigel {

// Strongly typed integer identifier. Tag keeps user, item and node ids apart.
template <class Tag>
struct Id {
  std::int64_t value{};

  constexpr Id() = default;
  constexpr explicit Id(std::int64_t v) : value(v) {}

  friend constexpr auto operator<=>(Id, Id) = default;
  friend std::ostream& operator<<(std::ostream& os, Id id) { return os << id.value; }
};

using UserId = Id<struct UserTag>;
using ItemId = Id<struct ItemTag>;
using NodeId = Id<struct NodeTag>;

// Simulation time in seconds, sizes in bytes.
using Seconds = double;
using Bytes = std::int64_t;

// Base of everything thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Precondition violated by the caller (unknown id, double rating, ...).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what) {}
};

// Malformed input file. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace cofigel

template <class Tag>
struct std::hash<cofigel::Id<Tag>> {
  std::size_t operator()(cofigel::Id<Tag> id) const noexcept {
    return std::hash<std::int64_t>{}(id.value);
  }
};
