#pragma once

#include <stdexcept>
#include <string>

namespace bridgeiv {

enum class ErrorCode {
  kConfig = 1,        // invalid parameters or configuration
  kData = 2,          // malformed input data (CSV schema, bounds, dimensions)
  kNumeric = 3,       // singular systems, weak identification, failed solves
  kIo = 4,            // file system failures
  kVerification = 5,  // a numerical check that must hold came out false
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorCode::kConfig, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorCode::kData, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorCode::kNumeric, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorCode::kIo, msg); }

}  // namespace bridgeiv
