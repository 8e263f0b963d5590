#pragma once

#include <stdexcept>
#include <string>

namespace hsu {

enum class ErrorKind {
  InvalidInput,
  Domain,
  Numeric,
  Geometry,
  State,
  Config,
  Classification,
  Efficiency,
  Consistency,
  Budget,
  Dependency,
  Degenerate,
  Precision,
  Io,
};

const char* error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hsu
