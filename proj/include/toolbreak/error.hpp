#ifndef TOOLBREAK_ERROR_HPP
#define TOOLBREAK_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace toolbreak {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file or stream content. `position` is a byte offset for binary
/// payloads and a 1-based line number for text payloads.
class FormatError : public Error {
 public:
  enum class Unit { byte, line };

  FormatError(const std::string& what, std::uint64_t position, Unit unit)
      : Error(what + (unit == Unit::byte ? " (at byte " : " (at line ") +
              std::to_string(position) + ")"),
        position_(position),
        unit_(unit) {}

  std::uint64_t position() const noexcept { return position_; }
  Unit unit() const noexcept { return unit_; }

 private:
  std::uint64_t position_;
  Unit unit_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Tensor or layer-geometry disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value outside an operation's domain (empty window, degenerate sigma, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace toolbreak

#endif
