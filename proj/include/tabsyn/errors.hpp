#pragma once

#include <stdexcept>
#include <string>

namespace tabsyn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input that could not be parsed (CSV cells, JSON sidecars).
struct ParseError : Error {
  using Error::Error;
};

// A value that parsed fine but falls outside its attribute domain.
struct DomainError : Error {
  using Error::Error;
};

// Inconsistent or invalid configuration (bad flag combinations, bad bounds).
struct ConfigError : Error {
  using Error::Error;
};

// External subprocess protocol failures: bad exit, bad output, timeout.
struct ProtocolError : Error {
  using Error::Error;
};

}  // namespace tabsyn
