#pragma once

#include <stdexcept>
#include <string>

namespace xmod {

// Error taxonomy mirrors the CLI exit codes: config 2, data 3, training 4,
// evaluation 5. Anything else escapes as std::runtime_error (exit 1).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainingAbort : std::runtime_error {
  explicit TrainingAbort(const std::string& msg) : std::runtime_error(msg) {}
};

struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace xmod
