#pragma once

#include <stdexcept>
#include <string>

namespace srforge {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorCode : int {
  Usage = 1,
  Io = 2,
  Numeric = 3,
  Internal = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorCode::Usage, what);
}

}  // namespace srforge
