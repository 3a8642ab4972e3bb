#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lgc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor/vector shape disagreement (channel counts, lengths, layouts).
struct ShapeError : Error {
  using Error::Error;
};

/// Malformed serialized data: bad magic, bad version, truncation.
struct FormatError : Error {
  using Error::Error;
};

/// Checksum mismatch on otherwise well-formed data.
struct CorruptionError : Error {
  using Error::Error;
};

/// Protocol state violation (e.g. mixing iterations in one round).
struct ProtocolError : Error {
  using Error::Error;
};

/// Invalid configuration. Carries every violation found, not just the first.
struct ConfigError : Error {
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations(std::move(violations)) {}
  explicit ConfigError(const std::string& one)
      : ConfigError(std::vector<std::string>{one}) {}

  std::vector<std::string> violations;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration:";
    for (const auto& s : v) {
      out += "\n  - " + s;
    }
    return out;
  }
};

}  // namespace lgc
