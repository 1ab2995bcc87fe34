// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#pragma once

#include <stdexcept>
#include <string>

namespace routing_audit {

/// Failure classes. The CLI maps each class to its own exit code.
enum class ErrorKind {
  kDomain,         // argument outside an operation's mathematical domain
  kConfig,         // malformed or inconsistent configuration
  kIo,             // filesystem or parse failure on an input file
  kProvider,       // scoring backend failed (HTTP, missing cache record, ...)
  kInvariant,      // an internal consistency check did not hold
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_domain(const std::string& what) {
  throw Error(ErrorKind::kDomain, what);
}

[[noreturn]] inline void throw_config(const std::string& what) {
  throw Error(ErrorKind::kConfig, what);
}

}  // namespace routing_audit
