#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace typedom {

enum class ErrorKind {
  parse,
  input,
  empty,
  numerical,
  io,
  protocol,
  transport,
  usage,
  unknown_domain,
  missing_fixture,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::input: return "input";
    case ErrorKind::empty: return "empty";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::io: return "io";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::transport: return "transport";
    case ErrorKind::usage: return "usage";
    case ErrorKind::unknown_domain: return "unknown_domain";
    case ErrorKind::missing_fixture: return "missing_fixture";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-readable kind so the
// CLI can report it on one line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace typedom
