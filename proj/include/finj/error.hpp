#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace finj {

enum class ErrorKind {
  Decode,
  Ingest,
  Split,
  Extraction,
  Format,
  Validation,
  Contract,
  Join,
  Config,
  Check,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Decode: return "decode";
    case ErrorKind::Ingest: return "ingest";
    case ErrorKind::Split: return "split";
    case ErrorKind::Extraction: return "extraction";
    case ErrorKind::Format: return "format";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Join: return "join";
    case ErrorKind::Config: return "config";
    case ErrorKind::Check: return "check";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so the CLI can map it
// to a machine-parsable line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace finj
