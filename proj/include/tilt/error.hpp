#pragma once

#include <stdexcept>
#include <string>

namespace tilt {

// Every failure raised by the library carries one of these kinds. The CLI
// maps kinds to exit codes, tests assert on them.
enum class ErrorKind {
  config,        // bad configuration value or script
  io,            // file missing / unreadable / unwritable
  schema,        // file or wire content violates its documented format
  precondition,  // caller violated an operation contract
  transport,     // endpoint unreachable, HTTP failure after retries
  capability,    // backend cannot do what was asked (e.g. no logprobs)
  alignment,     // echoed tokens do not reconstruct the continuation
  parse,         // reply text could not be interpreted (e.g. judge label)
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::schema: return "schema";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::transport: return "transport";
    case ErrorKind::capability: return "capability";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::parse: return "parse";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace tilt
