// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace dirhear {

enum class Errc {
  config,     // invalid parameters or configuration
  shape,      // tensor / channel mismatch
  contract,   // streaming contract (block size etc.)
  poisoned,   // non-finite input reached a stream
  io,
  internal,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::config: return "config";
    case Errc::shape: return "shape";
    case Errc::contract: return "contract";
    case Errc::poisoned: return "poisoned";
    case Errc::io: return "io";
    case Errc::internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + " error: " + msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

inline void require(bool ok, Errc code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

}  // namespace dirhear
